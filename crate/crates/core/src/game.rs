//! Game state, the multinomial throw, and a single recycling step.

use crate::distribution::ProbabilityDistribution;
use crate::rng::Rng;
use crate::{Error, Result, MAX_BALLS};

/// Ball counts per bin. `m` is cached and kept equal to `sum(counts)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BinConfiguration {
    counts: Vec<u64>,
    m: u64,
}

impl BinConfiguration {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidBinCount { n: 0, min: 1 });
        }
        let m = counts
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .filter(|&m| m <= MAX_BALLS)
            .ok_or_else(|| Error::InvalidConfig(format!("more than {MAX_BALLS} balls")))?;
        Ok(Self { counts, m })
    }

    /// All `m` balls in bin 0.
    pub fn all_in_first(n: usize, m: u64) -> Result<Self> {
        let mut counts = vec![0; n.max(1)];
        counts[0] = m;
        Self::new(counts)
    }

    /// The game's opening position: `m` balls thrown i.i.d. by `dist`.
    pub fn thrown(m: u64, dist: &ProbabilityDistribution, rng: &mut Rng) -> Result<Self> {
        if m > MAX_BALLS {
            return Err(Error::InvalidConfig(format!("more than {MAX_BALLS} balls")));
        }
        Ok(Self {
            counts: throw_balls(m, dist, rng),
            m,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    /// Empties `bin` and rethrows its balls in place, returning how many were
    /// recycled.
    pub fn recycle(&mut self, bin: usize, dist: &ProbabilityDistribution, rng: &mut Rng) -> Result<u64> {
        debug_assert_eq!(self.counts.len(), dist.n());
        let k = *self
            .counts
            .get(bin)
            .ok_or_else(|| Error::InvalidConfig(format!("bin {bin} out of range")))?;
        if k == 0 {
            return Err(Error::EmptyBinPicked { bin });
        }
        self.counts[bin] = 0;
        throw_into(&mut self.counts, k, dist, rng);
        Ok(k)
    }
}

/// Result of one recycling step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecycleOutcome {
    /// Balls rethrown this round (the round's reward).
    pub recycled: u64,
    pub chosen_bin: usize,
    pub next: BinConfiguration,
}

/// Throws `k` balls, each independently into bin `i` with probability `p_i`.
pub fn throw_balls(k: u64, dist: &ProbabilityDistribution, rng: &mut Rng) -> Vec<u64> {
    let mut counts = vec![0; dist.n()];
    throw_into(&mut counts, k, dist, rng);
    counts
}

/// Adds `k` categorical draws to `counts`.
#[inline]
pub fn throw_into(counts: &mut [u64], k: u64, dist: &ProbabilityDistribution, rng: &mut Rng) {
    for _ in 0..k {
        counts[dist.bin_for(rng.uniform())] += 1;
    }
}

pub fn recycle_step(
    config: &BinConfiguration,
    bin: usize,
    dist: &ProbabilityDistribution,
    rng: &mut Rng,
) -> Result<RecycleOutcome> {
    let mut next = config.clone();
    let recycled = next.recycle(bin, dist, rng)?;
    Ok(RecycleOutcome {
        recycled,
        chosen_bin: bin,
        next,
    })
}

/// `Z(X) = sum_j X_j^2 / p_j`; empty bins contribute nothing even when `p_j = 0`.
pub fn z_statistic(config: &BinConfiguration, dist: &ProbabilityDistribution) -> Result<f64> {
    let mut z = 0.0;
    for (j, &x) in config.counts().iter().enumerate() {
        if x == 0 {
            continue;
        }
        let p = dist.p(j);
        if p == 0.0 {
            return Err(Error::ZeroProbabilityOccupied { bin: j });
        }
        let x = x as f64;
        z += x * x / p;
    }
    Ok(z)
}
