use ballrecycle::bounds::{ae_rate_prediction, bound_report, freq_bound};
use ballrecycle::btree::{run_btree, BTreeConfig};
use ballrecycle::exact::{solve_opt_with, solve_stationary_with, ExactOptions};
use ballrecycle::montecarlo::{flow_check, run_batch, InitialConfig, SimConfig};
use ballrecycle::par::{self, Execution};
use ballrecycle::{Error, LRule, ProbabilityDistribution, StrategyKind};

use crate::cli::{AeArgs, BoundsArgs, BtreeArgs, ExactArgs, GameArgs, Initial, OptArgs, SimulateArgs};
use crate::error::CliError;
use crate::output::{num, Report, Table};

pub const SIMULATE_HEADER: &[&str] = &[
    "strategy",
    "dist",
    "m",
    "n",
    "seed",
    "burnin",
    "rounds",
    "rate",
    "rate_ci95",
    "e_r2",
    "max_flow_residual",
];
pub const PER_BIN_HEADER: &[&str] = &["bin", "p_i", "f_i", "R_i", "flow_residual"];
pub const EXACT_HEADER: &[&str] = &[
    "m",
    "n",
    "dist",
    "strategy",
    "rate",
    "e_r2",
    "gain_opt",
    "upper_bound",
    "ratio_to_opt",
];
pub const OPT_HEADER: &[&str] = &["m", "n", "dist", "gain_opt", "upper_bound", "iterations"];
pub const BOUNDS_HEADER: &[&str] = &[
    "m",
    "n",
    "dist",
    "half_quasi_norm",
    "upper_general",
    "upper_capped",
    "rb_lower_general",
    "uniform_upper",
    "uniform_lower_fb_gg",
    "pairflow_ratio",
    "rb_uniform_upper",
    "rb_uniform_lower_asymptotic",
    "freq_bound",
    "ae_central",
    "ae_lower",
    "ae_upper",
];
pub const BTREE_HEADER: &[&str] = &[
    "insertions",
    "flushes",
    "recycle_rate",
    "num_leaves",
    "max_leaf_ratio",
    "p95_leaf_ratio",
];

/// Header of a subcommand's primary CSV, known without running it.
pub fn static_header(sub: &str) -> Option<&'static [&'static str]> {
    Some(match sub {
        "simulate" => SIMULATE_HEADER,
        "exact" => EXACT_HEADER,
        "opt" => OPT_HEADER,
        "bounds" => BOUNDS_HEADER,
        "btree" => BTREE_HEADER,
        _ => return None,
    })
}

fn distribution(game: &GameArgs) -> Result<ProbabilityDistribution, CliError> {
    Ok(game.dist.materialize(game.n)?)
}

fn with_l_rule(kind: StrategyKind, ae: &AeArgs) -> Result<StrategyKind, CliError> {
    let rule = LRule {
        size: ae.ae_l_size,
        threshold: ae.ae_l_threshold,
    };
    match kind {
        StrategyKind::AggressiveEmpty { inner, .. } => Ok(StrategyKind::AggressiveEmpty { inner, l_rule: rule }),
        StrategyKind::Base(_) if rule != LRule::default() => Err(CliError::bad_args(
            "--ae-l-size and --ae-l-threshold need an ae:<inner> strategy",
        )),
        k => Ok(k),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<Report, CliError> {
    let dist = distribution(&args.game)?;
    let strategy = with_l_rule(args.strategy, &args.ae)?;
    if args.per_bin.is_some() && args.seed.len() != 1 {
        return Err(CliError::bad_args("--per-bin needs exactly one seed"));
    }
    let configs: Vec<SimConfig> = args
        .seed
        .iter()
        .map(|&seed| {
            let mut cfg = SimConfig::new(strategy, dist.clone(), args.game.m, args.rounds, seed);
            cfg.burn_in = args.burn_in;
            cfg.initial = match args.initial {
                Initial::Multinomial => InitialConfig::Multinomial,
                Initial::First => InitialConfig::AllInFirstBin,
            };
            cfg
        })
        .collect();
    let results = par::with_jobs(args.jobs, || run_batch(&configs, Execution::Parallel));
    let mut report = Report::new(Table::new(SIMULATE_HEADER));
    report.seeds = args.seed.clone();
    for (cfg, est) in configs.iter().zip(results) {
        let est = est?;
        let flow = match flow_check(&est) {
            Ok(r) => r,
            Err(Error::StatefulStrategy(_)) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        if est.convergence_suspect() {
            report.warnings.push(format!(
                "seed {}: first-half rate {} and second-half rate {} differ by more than 3 CI half-widths; burn-in may be too short",
                cfg.seed, est.first_half_rate, est.second_half_rate
            ));
        }
        report.table.push(vec![
            strategy.to_string(),
            args.game.dist.to_string(),
            est.m.to_string(),
            est.n.to_string(),
            cfg.seed.to_string(),
            est.burn_in.to_string(),
            est.rounds.to_string(),
            num(est.rate),
            num(est.rate_ci95),
            num(est.e_r2),
            num(flow),
        ]);
        if let Some(path) = &args.per_bin {
            let mut t = Table::new(PER_BIN_HEADER);
            for b in &est.per_bin {
                t.push(vec![b.bin.to_string(), num(b.p), num(b.f), num(b.r), num(b.flow_residual)]);
            }
            report.side_files.push((path.clone(), t));
        }
    }
    Ok(report)
}

pub fn exact(args: &ExactArgs) -> Result<Report, CliError> {
    let dist = distribution(&args.game)?;
    let strategy = with_l_rule(args.strategy, &args.ae)?;
    let m = args.game.m;
    let opts = ExactOptions {
        state_cap: args.state_cap,
        ..ExactOptions::default()
    };
    let analysis = solve_stationary_with(strategy, m, &dist, &opts)?;
    let mut report = Report::new(Table::new(EXACT_HEADER));
    let gain = if args.no_opt {
        f64::NAN
    } else {
        match solve_opt_with(m, &dist, &opts) {
            Ok(sol) => sol.gain,
            Err(Error::ZeroProbabilityBin { bin }) => {
                report
                    .warnings
                    .push(format!("bin {bin} has weight zero; optimal policy not computed"));
                f64::NAN
            }
            Err(e) => return Err(e.into()),
        }
    };
    let bounds = bound_report(m, &dist);
    report.table.push(vec![
        m.to_string(),
        dist.n().to_string(),
        args.game.dist.to_string(),
        strategy.to_string(),
        num(analysis.rate),
        num(analysis.e_r2),
        num(gain),
        num(bounds.upper_capped),
        num(analysis.rate / gain),
    ]);
    if let Some(path) = &args.pi_out {
        let mut t = Table::new(&["state", "prob"]);
        for (id, p) in analysis.pi.iter().enumerate() {
            t.push(vec![analysis.space.label(id), num(*p)]);
        }
        report.side_files.push((path.clone(), t));
    }
    Ok(report)
}

pub fn opt(args: &OptArgs) -> Result<Report, CliError> {
    let dist = distribution(&args.game)?;
    let opts = ExactOptions {
        state_cap: args.state_cap,
        ..ExactOptions::default()
    };
    let sol = solve_opt_with(args.game.m, &dist, &opts)?;
    let bounds = bound_report(args.game.m, &dist);
    let mut report = Report::new(Table::new(OPT_HEADER));
    report.table.push(vec![
        args.game.m.to_string(),
        dist.n().to_string(),
        args.game.dist.to_string(),
        num(sol.gain),
        num(bounds.upper_capped),
        sol.iterations.to_string(),
    ]);
    if let Some(path) = &args.policy_out {
        let mut t = Table::new(&["state", "bin"]);
        for (id, bin) in sol.policy.iter().enumerate() {
            t.push(vec![sol.space.label(id), bin.to_string()]);
        }
        report.side_files.push((path.clone(), t));
    }
    Ok(report)
}

pub fn bounds(args: &BoundsArgs) -> Result<Report, CliError> {
    let dist = distribution(&args.game)?;
    let m = args.game.m;
    let r = bound_report(m, &dist);
    let freq = args.freq.as_ref().map(|f| freq_bound(m, &dist, f)).transpose()?;
    let ae = match (args.ae_rate_on_l, args.ae_q) {
        (Some(rate), Some(q)) => {
            if rate.is_nan() || rate < 1.0 || !(0.0..1.0).contains(&q) {
                return Err(CliError::bad_args("need --ae-rate-on-l >= 1 and 0 <= --ae-q < 1"));
            }
            Some(ae_rate_prediction(rate, q))
        }
        _ => None,
    };
    let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
    let u = r.uniform.as_ref();
    let mut report = Report::new(Table::new(BOUNDS_HEADER));
    report.table.push(vec![
        m.to_string(),
        dist.n().to_string(),
        args.game.dist.to_string(),
        num(r.half_quasi_norm),
        num(r.upper_general),
        num(r.upper_capped),
        num(r.rb_lower_general),
        opt(u.map(|u| u.upper)),
        opt(u.map(|u| u.lower_fb_gg)),
        opt(u.map(|u| u.pairflow_ratio)),
        opt(u.map(|u| u.rb_upper)),
        opt(u.map(|u| u.rb_lower_asymptotic)),
        opt(freq),
        opt(ae.map(|a| a.central)),
        opt(ae.map(|a| a.lower)),
        opt(ae.map(|a| a.upper)),
    ]);
    Ok(report)
}

/// The one-row bounds table as aligned `label  value` lines; empty fields
/// are left out.
pub fn bounds_as_text(table: &Table) -> String {
    let width = table.header.iter().map(String::len).max().unwrap_or(0);
    let mut out = String::new();
    for row in &table.rows {
        for (h, v) in table.header.iter().zip(row) {
            if !v.is_empty() {
                out.push_str(&format!("{h:<width$}  {v}\n"));
            }
        }
    }
    out
}

pub fn btree(args: &BtreeArgs) -> Result<Report, CliError> {
    let cfg = BTreeConfig {
        policy: args.policy,
        keydist: args.keydist,
        buffer_capacity: args.buffer,
        leaf_capacity: args.leaf_capacity,
        inserts: args.inserts,
        window: args.window,
        seed: args.seed,
        warmup: args.warmup,
        freeze_leaves: args.freeze_leaves,
    };
    let rows = run_btree(&cfg)?;
    let mut report = Report::new(Table::new(BTREE_HEADER));
    report.seeds = vec![args.seed];
    for r in rows {
        report.table.push(vec![
            r.insertions.to_string(),
            r.flushes.to_string(),
            num(r.recycle_rate),
            r.num_leaves.to_string(),
            num(r.max_leaf_ratio),
            num(r.p95_leaf_ratio),
        ]);
    }
    Ok(report)
}
