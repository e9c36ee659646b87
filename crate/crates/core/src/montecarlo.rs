//! Long-run simulation of a strategy, with batch-means confidence intervals
//! and per-bin flow statistics.

use crate::distribution::ProbabilityDistribution;
use crate::game::BinConfiguration;
use crate::par::{self, Execution};
use crate::rng::Rng;
use crate::strategy::{Strategy, StrategyKind};
use crate::{Error, Result, MAX_BALLS};

/// Number of batches used for the batch-means confidence interval.
pub const BATCHES: usize = 32;

/// Two-sided 95% Student-t quantiles for 1..=31 degrees of freedom.
const T975: [f64; 31] = [
    12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646, 2.3060, 2.2622, 2.2281, 2.2010,
    2.1788, 2.1604, 2.1448, 2.1314, 2.1199, 2.1098, 2.1009, 2.0930, 2.0860, 2.0796, 2.0739,
    2.0687, 2.0639, 2.0595, 2.0555, 2.0518, 2.0484, 2.0452, 2.0423, 2.0395,
];

fn t975(df: usize) -> f64 {
    match df {
        0 => f64::INFINITY,
        1..=31 => T975[df - 1],
        // Normal approximation plus the first-order correction.
        _ => 1.959964 + 2.4 / df as f64,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InitialConfig {
    /// All `m` balls thrown i.i.d. by the distribution.
    #[default]
    Multinomial,
    AllInFirstBin,
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub m: u64,
    pub dist: ProbabilityDistribution,
    pub strategy: StrategyKind,
    pub seed: u64,
    /// `None` selects [`default_burn_in`].
    pub burn_in: Option<u64>,
    pub rounds: u64,
    /// Rounds per reporting window; must divide `rounds`. `None` means one window.
    pub window: Option<u64>,
    pub initial: InitialConfig,
}

impl SimConfig {
    pub fn new(strategy: StrategyKind, dist: ProbabilityDistribution, m: u64, rounds: u64, seed: u64) -> Self {
        Self {
            m,
            dist,
            strategy,
            seed,
            burn_in: None,
            rounds,
            window: None,
            initial: InitialConfig::Multinomial,
        }
    }

    pub fn n(&self) -> usize {
        self.dist.n()
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or_else(|| default_burn_in(self.m, self.n()))
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::AllBinsEmpty);
        }
        if self.m > MAX_BALLS {
            return Err(Error::InvalidConfig(format!("m exceeds {MAX_BALLS}")));
        }
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if let Some(w) = self.window {
            if w == 0 || !self.rounds.is_multiple_of(w) {
                return Err(Error::InvalidConfig(format!(
                    "window {w} does not divide rounds {}",
                    self.rounds
                )));
            }
        }
        Ok(())
    }
}

/// `10 * n * max(1, n/m)` rounds.
pub fn default_burn_in(m: u64, n: usize) -> u64 {
    let n = n as u64;
    10 * n * (n / m.max(1)).max(1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerBinStats {
    pub bin: usize,
    pub p: f64,
    /// Fraction of rounds in which this bin was recycled.
    pub f: f64,
    /// Mean balls recycled when this bin was picked (0 if never picked).
    pub r: f64,
    /// `p_i * rate - f_i * R_i`.
    pub flow_residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate {
    pub strategy: StrategyKind,
    pub m: u64,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub burn_in: u64,
    pub rounds: u64,
    /// Mean balls recycled per measured round.
    pub rate: f64,
    /// Half-width of the 95% batch-means confidence interval.
    pub rate_ci95: f64,
    /// Mean of the squared reward.
    pub e_r2: f64,
    pub per_bin: Vec<PerBinStats>,
    /// Mean reward per reporting window, in order.
    pub window_rates: Vec<f64>,
    pub first_half_rate: f64,
    pub second_half_rate: f64,
}

impl RateEstimate {
    pub fn max_flow_residual(&self) -> f64 {
        self.per_bin
            .iter()
            .map(|b| b.flow_residual.abs())
            .fold(0.0, f64::max)
    }

    /// Whether the two halves of the measurement disagree by more than three
    /// confidence half-widths.
    pub fn convergence_suspect(&self) -> bool {
        (self.first_half_rate - self.second_half_rate).abs() > 3.0 * self.rate_ci95
    }
}

/// Raw per-round sums for one or more runs; pooled before finishing.
#[derive(Clone, Debug)]
struct Tally {
    rounds: u64,
    total: u64,
    total_sq: u128,
    picks: Vec<u64>,
    recycled: Vec<u64>,
    batch_means: Vec<f64>,
    window_rates: Vec<f64>,
    first_half: u64,
    first_half_rounds: u64,
}

fn simulate(cfg: &SimConfig, rng: Rng) -> Result<Tally> {
    cfg.validate()?;
    let mut rng = rng;
    let n = cfg.n();
    let mut config = match cfg.initial {
        InitialConfig::Multinomial => BinConfiguration::thrown(cfg.m, &cfg.dist, &mut rng)?,
        InitialConfig::AllInFirstBin => BinConfiguration::all_in_first(n, cfg.m)?,
    };
    let mut strategy = Strategy::new(cfg.strategy, &cfg.dist, cfg.m);

    for _ in 0..cfg.burn_in() {
        let bin = strategy.pick(&config, &mut rng)?;
        config.recycle(bin, &cfg.dist, &mut rng)?;
    }

    let rounds = cfg.rounds;
    let batches = (BATCHES as u64).min(rounds);
    let window = cfg.window.unwrap_or(rounds);
    let half = rounds / 2;
    let mut tally = Tally {
        rounds,
        total: 0,
        total_sq: 0,
        picks: vec![0; n],
        recycled: vec![0; n],
        batch_means: Vec::with_capacity(batches as usize),
        window_rates: Vec::with_capacity((rounds / window) as usize),
        first_half: 0,
        first_half_rounds: half,
    };
    let mut batch_sum = 0u64;
    let mut batch_start = 0u64;
    let mut batch_idx = 0u64;
    let mut window_sum = 0u64;
    for t in 0..rounds {
        let bin = strategy.pick(&config, &mut rng)?;
        let k = config.recycle(bin, &cfg.dist, &mut rng)?;
        tally.total += k;
        tally.total_sq += (k as u128) * (k as u128);
        tally.picks[bin] += 1;
        tally.recycled[bin] += k;
        batch_sum += k;
        window_sum += k;
        if t + 1 == half {
            tally.first_half = tally.total;
        }
        // Batch b covers rounds [b*rounds/batches, (b+1)*rounds/batches).
        if t + 1 == (batch_idx + 1) * rounds / batches {
            tally
                .batch_means
                .push(batch_sum as f64 / (t + 1 - batch_start) as f64);
            batch_sum = 0;
            batch_start = t + 1;
            batch_idx += 1;
        }
        if (t + 1) % window == 0 {
            tally.window_rates.push(window_sum as f64 / window as f64);
            window_sum = 0;
        }
    }
    Ok(tally)
}

fn finish(cfg: &SimConfig, seeds: Vec<u64>, tallies: Vec<Tally>) -> RateEstimate {
    let n = cfg.n();
    let mut rounds = 0u64;
    let mut total = 0u64;
    let mut total_sq = 0u128;
    let mut picks = vec![0u64; n];
    let mut recycled = vec![0u64; n];
    let mut batch_means = Vec::new();
    let mut first = (0u64, 0u64);
    let mut second = (0u64, 0u64);
    let mut window_rates: Vec<f64> = Vec::new();
    for t in &tallies {
        rounds += t.rounds;
        total += t.total;
        total_sq += t.total_sq;
        for i in 0..n {
            picks[i] += t.picks[i];
            recycled[i] += t.recycled[i];
        }
        batch_means.extend_from_slice(&t.batch_means);
        first.0 += t.first_half;
        first.1 += t.first_half_rounds;
        second.0 += t.total - t.first_half;
        second.1 += t.rounds - t.first_half_rounds;
        if window_rates.is_empty() {
            window_rates = t.window_rates.clone();
        } else {
            for (w, x) in window_rates.iter_mut().zip(&t.window_rates) {
                *w += x;
            }
        }
    }
    let k = tallies.len().max(1) as f64;
    for w in &mut window_rates {
        *w /= k;
    }

    let rate = total as f64 / rounds as f64;
    let e_r2 = total_sq as f64 / rounds as f64;
    let b = batch_means.len();
    let rate_ci95 = if b >= 2 {
        let mean = batch_means.iter().sum::<f64>() / b as f64;
        let var = batch_means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
        t975(b - 1) * (var / b as f64).sqrt()
    } else {
        f64::INFINITY
    };
    let per_bin = (0..n)
        .map(|i| {
            let f = picks[i] as f64 / rounds as f64;
            let r = if picks[i] > 0 {
                recycled[i] as f64 / picks[i] as f64
            } else {
                0.0
            };
            let p = cfg.dist.p(i);
            PerBinStats {
                bin: i,
                p,
                f,
                r,
                flow_residual: p * rate - recycled[i] as f64 / rounds as f64,
            }
        })
        .collect();
    let ratio = |(s, r): (u64, u64)| if r == 0 { rate } else { s as f64 / r as f64 };
    RateEstimate {
        strategy: cfg.strategy,
        m: cfg.m,
        n,
        seeds,
        burn_in: cfg.burn_in(),
        rounds,
        rate,
        rate_ci95,
        e_r2,
        per_bin,
        window_rates,
        first_half_rate: ratio(first),
        second_half_rate: ratio(second),
    }
}

/// Plays `burn_in + rounds` rounds and summarizes the last `rounds`.
pub fn run_sim(cfg: &SimConfig) -> Result<RateEstimate> {
    let tally = simulate(cfg, Rng::new(cfg.seed))?;
    Ok(finish(cfg, vec![cfg.seed], vec![tally]))
}

/// Runs `cfg` once per seed and pools the per-round statistics.
pub fn run_pooled(cfg: &SimConfig, seeds: &[u64], exec: Execution) -> Result<RateEstimate> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("no seeds given".into()));
    }
    let tallies = par::try_map(exec, seeds, |&s| simulate(cfg, Rng::new(s)))?;
    Ok(finish(cfg, seeds.to_vec(), tallies))
}

/// Runs independent configurations, results in input order.
pub fn run_batch(cfgs: &[SimConfig], exec: Execution) -> Vec<Result<RateEstimate>> {
    par::map(exec, cfgs, run_sim)
}

/// Largest `|p_i * rate - f_i * R_i|`. The flow equation is a statement about
/// stateless strategies, so stateful estimates are refused.
pub fn flow_check(est: &RateEstimate) -> Result<f64> {
    if !est.strategy.is_stateless() {
        return Err(Error::StatefulStrategy(est.strategy.to_string()));
    }
    Ok(est.max_flow_residual())
}
