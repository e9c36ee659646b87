use std::path::PathBuf;

use ballrecycle::btree::{FlushPolicy, KeyDistribution};
use ballrecycle::{NamedDistribution, StrategyKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "ballrecycle",
    version,
    about = "Ball-recycling games: simulation, exact analysis, bounds and B-tree buffer experiments",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Monte Carlo estimate of a strategy's recycling rate.
    Simulate(SimulateArgs),
    /// Exact stationary analysis of a strategy on a small game.
    Exact(ExactArgs),
    /// Optimal policy of a small game by policy iteration.
    Opt(OptArgs),
    /// Closed-form rate bounds.
    Bounds(BoundsArgs),
    /// Insertion buffer in front of a splitting B-tree leaf set.
    Btree(BtreeArgs),
    /// Run another subcommand over a grid of flag values.
    Sweep(SweepArgs),
    /// Render CSV columns as an SVG line chart.
    Plot(PlotArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Exact(_) => "exact",
            Command::Opt(_) => "opt",
            Command::Bounds(_) => "bounds",
            Command::Btree(_) => "btree",
            Command::Sweep(_) => "sweep",
            Command::Plot(_) => "plot",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct GameArgs {
    /// uniform, skyscraper, powerlaw:<s> or file:<path>
    #[arg(long, default_value = "uniform")]
    pub dist: NamedDistribution,
    /// Number of balls.
    #[arg(short = 'm', long = "m")]
    pub m: u64,
    /// Number of bins (taken from the file for file: distributions).
    #[arg(short = 'n', long = "n")]
    pub n: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct AeArgs {
    /// Size of the protected set for ae:<inner> strategies.
    #[arg(long)]
    pub ae_l_size: Option<usize>,
    /// Weight threshold for the protected set of ae:<inner> strategies.
    #[arg(long)]
    pub ae_l_threshold: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Write the primary CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Initial {
    /// All balls thrown i.i.d. by the distribution.
    Multinomial,
    /// All balls in bin 0.
    First,
}

#[derive(Args, Debug, Clone)]
pub struct SimulateArgs {
    #[arg(long)]
    pub strategy: StrategyKind,
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub ae: AeArgs,
    /// Measured rounds per seed.
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    /// One or more seeds (comma separated); one row per seed.
    #[arg(long, required = true, value_delimiter = ',')]
    pub seed: Vec<u64>,
    /// Unmeasured rounds before measuring (default 10 n max(1, n/m)).
    #[arg(long)]
    pub burn_in: Option<u64>,
    #[arg(long, value_enum, default_value_t = Initial::Multinomial)]
    pub initial: Initial,
    /// Per-bin CSV (bin,p_i,f_i,R_i,flow_residual); needs a single seed.
    #[arg(long)]
    pub per_bin: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ExactArgs {
    #[arg(long)]
    pub strategy: StrategyKind,
    #[command(flatten)]
    pub game: GameArgs,
    #[command(flatten)]
    pub ae: AeArgs,
    /// Largest state space to enumerate.
    #[arg(long, default_value_t = 200_000)]
    pub state_cap: usize,
    /// Skip the optimal-policy solve (gain_opt and ratio_to_opt become NaN).
    #[arg(long)]
    pub no_opt: bool,
    /// Stationary distribution CSV (state,prob).
    #[arg(long)]
    pub pi_out: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct OptArgs {
    #[command(flatten)]
    pub game: GameArgs,
    #[arg(long, default_value_t = 200_000)]
    pub state_cap: usize,
    /// Optimal policy CSV (state,bin).
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub game: GameArgs,
    /// Print a labeled table instead of CSV.
    #[arg(long)]
    pub table: bool,
    /// Recycle frequencies per bin (comma separated) for the frequency bound.
    #[arg(long, value_delimiter = ',')]
    pub freq: Option<Vec<f64>>,
    /// Rate of the inner strategy on the protected set, for the
    /// Aggressive-Empty prediction.
    #[arg(long, requires = "ae_q")]
    pub ae_rate_on_l: Option<f64>,
    /// Weight outside the protected set.
    #[arg(long, requires = "ae_rate_on_l")]
    pub ae_q: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BtreeArgs {
    #[arg(long)]
    pub policy: FlushPolicy,
    /// uniform[:lo:hi], pareto:alpha[:x_min] or normal[:mu:sigma]
    #[arg(long, default_value = "uniform")]
    pub keydist: KeyDistribution,
    /// Buffer capacity in keys.
    #[arg(long, default_value_t = 2500)]
    pub buffer: usize,
    /// Keys per leaf before it splits.
    #[arg(long, default_value_t = 160)]
    pub leaf_capacity: usize,
    #[arg(long, default_value_t = 5_000_000)]
    pub inserts: u64,
    /// Inserts per reported row.
    #[arg(long, default_value_t = 50_000)]
    pub window: u64,
    #[arg(long)]
    pub seed: u64,
    /// Inserts before the first reported window.
    #[arg(long, default_value_t = 0)]
    pub warmup: u64,
    /// Use this many equal-mass leaves and never split.
    #[arg(long)]
    pub freeze_leaves: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// flag=start:end:step, inclusive. Repeatable; the first is outermost.
    #[arg(long)]
    pub range: Vec<String>,
    /// flag=v1,v2,... Repeatable.
    #[arg(long)]
    pub list: Vec<String>,
    /// Worker threads (default: logical cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
    /// The subcommand and its flags, after `--`.
    #[arg(last = true, required = true)]
    pub command: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct PlotArgs {
    /// CSV file; lines starting with `#` are skipped.
    pub input: PathBuf,
    /// Column for the x axis.
    #[arg(long)]
    pub x: String,
    /// Columns to draw (comma separated).
    #[arg(long, required = true, value_delimiter = ',')]
    pub y: Vec<String>,
    #[arg(long)]
    pub title: Option<String>,
    #[arg(long, default_value_t = 800)]
    pub width: u32,
    #[arg(long, default_value_t = 500)]
    pub height: u32,
    #[command(flatten)]
    pub out: OutArgs,
}
