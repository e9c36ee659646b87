//! Exact analysis of small games.
//!
//! Enumerates every configuration, solves the stationary distribution of a
//! strategy's Markov chain, and finds the optimal policy with average-reward
//! policy iteration. Small chains are solved densely; larger ones use a
//! matrix-free transition operator (see `kernel`).

mod kernel;
mod linalg;
mod space;

use std::collections::BTreeSet;

use kernel::Kernel;
pub use space::{enumerate_states, state_count, transition_row, Rethrows, StateSpace};

use crate::distribution::ProbabilityDistribution;
use crate::montecarlo::PerBinStats;
use crate::par::{self, Execution};
use crate::strategy::{Strategy, StrategyKind};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ExactOptions {
    /// Largest state space accepted (counting Golden Gate cursor states).
    pub state_cap: usize,
    /// Chains up to this many states are solved with dense linear algebra.
    pub dense_limit: usize,
    /// Largest number of partial configurations the matrix-free operator
    /// may hold, `C(m + n, n)`.
    pub kernel_cap: usize,
    /// Target residual for iterative solves.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub exec: Execution,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            state_cap: 200_000,
            dense_limit: 1200,
            kernel_cap: 50_000_000,
            tolerance: 1e-14,
            max_iterations: 1_000_000,
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct StationaryAnalysis {
    pub strategy: StrategyKind,
    pub space: StateSpace,
    /// Stationary probability of each configuration (cursor states summed).
    pub pi: Vec<f64>,
    pub rate: f64,
    pub e_r2: f64,
    pub per_bin: Vec<PerBinStats>,
    /// `max |pi P - pi|` of the returned solution.
    pub residual: f64,
}

impl StationaryAnalysis {
    pub fn max_flow_residual(&self) -> f64 {
        self.per_bin
            .iter()
            .map(|b| b.flow_residual.abs())
            .fold(0.0, f64::max)
    }

    /// `(f_L, R_L)` for a set of bins: how often some bin of `set` is
    /// recycled, and the mean reward when it is.
    pub fn subset_flow(&self, set: &[usize]) -> (f64, f64) {
        let f: f64 = set.iter().map(|&i| self.per_bin[i].f).sum();
        let fr: f64 = set.iter().map(|&i| self.per_bin[i].f * self.per_bin[i].r).sum();
        (f, if f > 0.0 { fr / f } else { 0.0 })
    }
}

#[derive(Clone, Debug)]
pub struct MdpSolution {
    pub space: StateSpace,
    /// Bin recycled in each configuration.
    pub policy: Vec<usize>,
    pub gain: f64,
    /// Relative value of each configuration, with state 0 pinned to 0.
    pub bias: Vec<f64>,
    pub iterations: usize,
}

/// One outcome of an action: reach level `level` of the kernel at index
/// `idx` (base configuration and next internal state), then throw the rest.
#[derive(Clone, Copy, Debug)]
struct Move {
    bin: usize,
    prob: f64,
    level: usize,
    idx: usize,
}

fn check_n_and_m(m: u64, dist: &ProbabilityDistribution) -> Result<()> {
    if m == 0 {
        return Err(Error::AllBinsEmpty);
    }
    if dist.n() == 0 {
        return Err(Error::InvalidBinCount { n: 0, min: 1 });
    }
    Ok(())
}

fn check_kernel(m: u64, n: usize, opts: &ExactOptions) -> Result<()> {
    let size = space::binomial(m as u128 + n as u128, n as u128);
    if size > opts.kernel_cap as u128 {
        return Err(Error::StateSpaceTooLarge {
            states: size,
            cap: opts.kernel_cap,
        });
    }
    Ok(())
}

pub fn solve_stationary(kind: StrategyKind, m: u64, dist: &ProbabilityDistribution) -> Result<StationaryAnalysis> {
    solve_stationary_with(kind, m, dist, &ExactOptions::default())
}

pub fn solve_stationary_with(
    kind: StrategyKind,
    m: u64,
    dist: &ProbabilityDistribution,
    opts: &ExactOptions,
) -> Result<StationaryAnalysis> {
    check_n_and_m(m, dist)?;
    let n = dist.n();
    let strategy = Strategy::new(kind, dist, m);
    let s = strategy.internal_states();
    let base_count = state_count(m, n);
    let total = base_count.saturating_mul(s as u128);
    if total > opts.state_cap as u128 {
        return Err(Error::StateSpaceTooLarge {
            states: total,
            cap: opts.state_cap,
        });
    }
    let space = enumerate_states(m, n, opts.state_cap)?;
    let big = space.len() * s;

    // Actions in every (configuration, internal state).
    let actions = par::try_map(opts.exec, &(0..big).collect::<Vec<_>>(), |&a| {
        strategy.actions(space.state(a / s), a % s)
    })?;

    let (pi_aug, residual) = if big <= opts.dense_limit {
        stationary_dense(&space, s, &actions, dist, opts)?
    } else {
        check_kernel(m, n, opts)?;
        let kernel = Kernel::new(m, dist, opts.exec);
        let moves: Vec<Vec<Move>> = actions
            .iter()
            .enumerate()
            .map(|(a, acts)| {
                let x = space.state(a / s);
                acts.iter().map(|act| make_move(&kernel, x, act.bin, act.prob, act.next_internal, s)).collect()
            })
            .collect();
        stationary_iterative(&kernel, s, &moves, opts)?
    };

    let mut pi = vec![0.0; space.len()];
    let mut rate = 0.0;
    let mut e_r2 = 0.0;
    let mut f = vec![0.0; n];
    let mut fr = vec![0.0; n];
    for (a, acts) in actions.iter().enumerate() {
        let w = pi_aug[a];
        pi[a / s] += w;
        if w == 0.0 {
            continue;
        }
        let x = space.state(a / s);
        for act in acts {
            let k = x[act.bin] as f64;
            let mass = w * act.prob;
            rate += mass * k;
            e_r2 += mass * k * k;
            f[act.bin] += mass;
            fr[act.bin] += mass * k;
        }
    }
    let per_bin = (0..n)
        .map(|i| PerBinStats {
            bin: i,
            p: dist.p(i),
            f: f[i],
            r: if f[i] > 0.0 { fr[i] / f[i] } else { 0.0 },
            flow_residual: dist.p(i) * rate - fr[i],
        })
        .collect();
    Ok(StationaryAnalysis {
        strategy: kind,
        space,
        pi,
        rate,
        e_r2,
        per_bin,
        residual,
    })
}

fn make_move(kernel: &Kernel, x: &[u64], bin: usize, prob: f64, next_internal: usize, s: usize) -> Move {
    let k = x[bin] as usize;
    let mut base = x.to_vec();
    base[bin] = 0;
    let level = kernel.m() - k;
    Move {
        bin,
        prob,
        level,
        idx: kernel.rank(&base) * s + next_internal,
    }
}

/// Precomputes rethrow outcomes for every bin size that occurs.
fn outcome_table(space: &StateSpace, dist: &ProbabilityDistribution) -> Vec<Vec<(Vec<u64>, f64)>> {
    let sizes: BTreeSet<u64> = space.iter().flat_map(|x| x.iter().copied()).filter(|&k| k > 0).collect();
    let mut rethrows = Rethrows::new(dist);
    let mut table = vec![Vec::new(); space.m() as usize + 1];
    for k in sizes {
        table[k as usize] = rethrows.outcomes(k).to_vec();
    }
    table
}

/// Dense `big x big` transition matrix of the augmented chain.
fn dense_matrix(
    space: &StateSpace,
    s: usize,
    actions: &[Vec<crate::strategy::Action>],
    dist: &ProbabilityDistribution,
    exec: Execution,
) -> Vec<f64> {
    let big = actions.len();
    let table = outcome_table(space, dist);
    let rows = par::map_range(exec, big, |a| {
        let x = space.state(a / s);
        let mut row = Vec::new();
        for act in &actions[a] {
            let k = x[act.bin] as usize;
            for (t, prob) in space::row_from_outcomes(space, x, act.bin, &table[k]) {
                row.push((t * s + act.next_internal, act.prob * prob));
            }
        }
        row
    });
    let mut p = vec![0.0; big * big];
    for (a, row) in rows.into_iter().enumerate() {
        for (t, prob) in row {
            p[a * big + t] += prob;
        }
    }
    p
}

fn stationary_dense(
    space: &StateSpace,
    s: usize,
    actions: &[Vec<crate::strategy::Action>],
    dist: &ProbabilityDistribution,
    opts: &ExactOptions,
) -> Result<(Vec<f64>, f64)> {
    let big = actions.len();
    let p = dense_matrix(space, s, actions, dist, opts.exec);
    // pi (P - I) = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = vec![0.0; big * big];
    for i in 0..big {
        for j in 0..big {
            a[j * big + i] = p[i * big + j];
        }
        a[i * big + i] -= 1.0;
    }
    for j in 0..big {
        a[(big - 1) * big + j] = 1.0;
    }
    let mut b = vec![0.0; big];
    b[big - 1] = 1.0;
    let pi = linalg::solve(a, b, big).ok_or(Error::NotConverged {
        what: "stationary solve (singular system)",
        iterations: 0,
        residual: f64::NAN,
    })?;
    let pi = clamp_and_normalize(pi);
    let mut residual = 0.0f64;
    for j in 0..big {
        let mut next = 0.0;
        for i in 0..big {
            next += pi[i] * p[i * big + j];
        }
        residual = residual.max((next - pi[j]).abs());
    }
    Ok((pi, residual))
}

fn clamp_and_normalize(mut pi: Vec<f64>) -> Vec<f64> {
    for x in &mut pi {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    for x in &mut pi {
        *x /= total;
    }
    pi
}

fn step_distribution(kernel: &Kernel, s: usize, moves: &[Vec<Move>], pi: &[f64]) -> Vec<f64> {
    let mut deposits = kernel.empty_deposits(s);
    for (a, mv) in moves.iter().enumerate() {
        if pi[a] == 0.0 {
            continue;
        }
        for m in mv {
            deposits[m.level][m.idx] += pi[a] * m.prob;
        }
    }
    kernel.forward(deposits, s)
}

fn stationary_iterative(kernel: &Kernel, s: usize, moves: &[Vec<Move>], opts: &ExactOptions) -> Result<(Vec<f64>, f64)> {
    let big = moves.len();
    let mut pi = vec![1.0 / big as f64; big];
    let mut residual = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let next = step_distribution(kernel, s, moves, &pi);
        residual = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if residual < opts.tolerance {
            return Ok((clamp_and_normalize(pi), residual));
        }
        // Lazy step: same fixed point, no periodicity.
        for (p, x) in pi.iter_mut().zip(next) {
            *p = 0.5 * (*p + x);
        }
    }
    Err(Error::NotConverged {
        what: "stationary power iteration",
        iterations: opts.max_iterations,
        residual,
    })
}

pub fn solve_opt(m: u64, dist: &ProbabilityDistribution) -> Result<MdpSolution> {
    solve_opt_with(m, dist, &ExactOptions::default())
}

/// Optimal stateless deterministic policy by Howard policy iteration.
/// Requires every bin weight to be positive so that each policy's chain has
/// a single recurrent class.
pub fn solve_opt_with(m: u64, dist: &ProbabilityDistribution, opts: &ExactOptions) -> Result<MdpSolution> {
    check_n_and_m(m, dist)?;
    if let Some(bin) = dist.weights().iter().position(|&p| p == 0.0) {
        return Err(Error::ZeroProbabilityBin { bin });
    }
    let n = dist.n();
    let space = enumerate_states(m, n, opts.state_cap)?;
    if n == 1 {
        return Ok(MdpSolution {
            space,
            policy: vec![0],
            gain: m as f64,
            bias: vec![0.0],
            iterations: 0,
        });
    }
    check_kernel(m, n, opts)?;
    let kernel = Kernel::new(m, dist, opts.exec);
    let len = space.len();
    // Every non-empty bin is an action.
    let choices: Vec<Vec<Move>> = space
        .iter()
        .map(|x| {
            (0..n)
                .filter(|&i| x[i] > 0)
                .map(|i| make_move(&kernel, x, i, 1.0, 0, 1))
                .collect()
        })
        .collect();
    let dense = len <= opts.dense_limit;
    let table = if dense { outcome_table(&space, dist) } else { Vec::new() };

    // Start from Fullest Bin.
    let mut policy: Vec<usize> = space
        .iter()
        .map(|x| (0..n).fold(0, |b, i| if x[i] > x[b] { i } else { b }))
        .collect();
    let mut h = vec![0.0; len];
    for iteration in 1..=1000 {
        let gain;
        (gain, h) = if dense {
            evaluate_dense(&space, &policy, &table, opts.exec)?
        } else {
            evaluate_iterative(&kernel, &space, &policy, &choices, h, opts)?
        };
        let expect = kernel.backward(&h, 1);
        let mut changed = false;
        for (st, x) in space.iter().enumerate() {
            let q = |mv: &Move| x[mv.bin] as f64 + expect[mv.level][mv.idx];
            let current = choices[st].iter().find(|mv| mv.bin == policy[st]).expect("policy bin is an action");
            let q_cur = q(current);
            let q_max = choices[st].iter().map(q).fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-11 * q_max.abs().max(1.0);
            if q_max > q_cur + tol {
                policy[st] = choices[st].iter().find(|mv| q(mv) >= q_max - tol).expect("maximizer exists").bin;
                changed = true;
            }
        }
        if !changed {
            return Ok(MdpSolution {
                space,
                policy,
                gain,
                bias: h,
                iterations: iteration,
            });
        }
    }
    Err(Error::NotConverged {
        what: "policy iteration",
        iterations: 1000,
        residual: f64::NAN,
    })
}

/// Solves `g + h(x) = r(x) + (P h)(x)` with `h(0) = 0`.
fn evaluate_dense(
    space: &StateSpace,
    policy: &[usize],
    table: &[Vec<(Vec<u64>, f64)>],
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    let len = space.len();
    let rows = par::map_range(exec, len, |st| {
        let x = space.state(st);
        space::row_from_outcomes(space, x, policy[st], &table[x[policy[st]] as usize])
    });
    // Unknowns: column 0 holds g (h(0) is pinned), columns 1.. hold h.
    let mut a = vec![0.0; len * len];
    let mut b = vec![0.0; len];
    for (st, row) in rows.iter().enumerate() {
        a[st * len] = 1.0;
        if st > 0 {
            a[st * len + st] += 1.0;
        }
        for &(t, prob) in row {
            if t > 0 {
                a[st * len + t] -= prob;
            }
        }
        b[st] = space.state(st)[policy[st]] as f64;
    }
    let mut sol = linalg::solve(a, b, len).ok_or(Error::NotConverged {
        what: "policy evaluation (singular system)",
        iterations: 0,
        residual: f64::NAN,
    })?;
    let gain = sol[0];
    sol[0] = 0.0;
    Ok((gain, sol))
}

/// Relative value iteration on the lazy chain, warm-started from `h`.
fn evaluate_iterative(
    kernel: &Kernel,
    space: &StateSpace,
    policy: &[usize],
    choices: &[Vec<Move>],
    mut h: Vec<f64>,
    opts: &ExactOptions,
) -> Result<(f64, Vec<f64>)> {
    let chosen: Vec<Move> = choices
        .iter()
        .zip(policy)
        .map(|(c, &bin)| *c.iter().find(|mv| mv.bin == bin).expect("policy bin is an action"))
        .collect();
    let mut span = f64::INFINITY;
    for _ in 0..opts.max_iterations {
        let expect = kernel.backward(&h, 1);
        let th: Vec<f64> = chosen
            .iter()
            .enumerate()
            .map(|(st, mv)| space.state(st)[mv.bin] as f64 + expect[mv.level][mv.idx])
            .collect();
        // min/max of (T h - h) bracket the gain.
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .map(|(t, x)| t - x)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        span = hi - lo;
        if span < opts.tolerance * hi.abs().max(1.0) {
            let gain = th[0] - h[0];
            return Ok((gain, h));
        }
        let offset = 0.5 * (h[0] + th[0]);
        for (x, t) in h.iter_mut().zip(th) {
            *x = 0.5 * (*x + t) - offset;
        }
    }
    Err(Error::NotConverged {
        what: "policy evaluation",
        iterations: opts.max_iterations,
        residual: span,
    })
}
