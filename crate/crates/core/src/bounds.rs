//! Closed-form bounds on recycling rates.

use crate::distribution::{half_quasi_norm, ProbabilityDistribution};
use crate::{Error, Result};

/// Random Ball on the uniform distribution is at least this fraction of
/// optimal for large `m`.
pub const RB_UNIFORM_OPT_FRACTION: f64 = 0.5 + 1.0 / 648.0;

/// Random Ball on the uniform distribution recycles at least about this many
/// multiples of `m/n` once `m` is large compared to `n log n`. The constant
/// in "large" is unknown, so this is only ever used as a soft check.
pub const RB_UNIFORM_EXCESS: f64 = 1.0 + 1.0 / 1296.0;

/// Slope of the Random Ball upper bound on the uniform distribution.
pub const RB_UNIFORM_UPPER_SLOPE: f64 = 1.994;

#[derive(Clone, Debug, PartialEq)]
pub struct UniformBounds {
    /// `2m/n + 1`: no strategy does better.
    pub upper: f64,
    /// `2m/(n+1)`: Fullest Bin and Golden Gate do at least this well.
    pub lower_fb_gg: f64,
    /// `(2m+n-1)/(n+1)`: Random Ball's exact `E[R^2]/R`.
    pub pairflow_ratio: f64,
    /// `1 + 1.994 m/n`: Random Ball does no better.
    pub rb_upper: f64,
    /// `(1 + 1/6^4) m/n`, Random Ball's asymptotic lower bound.
    pub rb_lower_asymptotic: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub m: u64,
    pub n: usize,
    pub half_quasi_norm: f64,
    /// `(2m+n-1)/||p||_{1/2}`, for any strategy.
    pub upper_general: f64,
    /// `min(m, upper_general)`; no round recycles more than `m` balls.
    pub upper_capped: f64,
    /// `m/||p||_{1/2}`, Random Ball's lower bound.
    pub rb_lower_general: f64,
    /// Present only when the distribution is uniform.
    pub uniform: Option<UniformBounds>,
}

pub fn bound_report(m: u64, dist: &ProbabilityDistribution) -> BoundReport {
    let n = dist.n();
    let (mf, nf) = (m as f64, n as f64);
    let norm = half_quasi_norm(dist);
    let upper_general = (2.0 * mf + nf - 1.0) / norm;
    let uniform = dist.is_uniform().then(|| UniformBounds {
        upper: 2.0 * mf / nf + 1.0,
        lower_fb_gg: 2.0 * mf / (nf + 1.0),
        pairflow_ratio: (2.0 * mf + nf - 1.0) / (nf + 1.0),
        rb_upper: 1.0 + RB_UNIFORM_UPPER_SLOPE * mf / nf,
        rb_lower_asymptotic: RB_UNIFORM_EXCESS * mf / nf,
    });
    BoundReport {
        m,
        n,
        half_quasi_norm: norm,
        upper_general,
        upper_capped: upper_general.min(mf),
        rb_lower_general: mf / norm,
        uniform,
    }
}

/// `(2m+n-1) / sum_j p_j/f_j`: the best rate any strategy that recycles bin
/// `j` with long-run frequency `f_j` can reach.
pub fn freq_bound(m: u64, dist: &ProbabilityDistribution, f: &[f64]) -> Result<f64> {
    let n = dist.n();
    if f.len() != n {
        return Err(Error::InvalidConfig(format!("{} frequencies for {n} bins", f.len())));
    }
    let mut denom = 0.0;
    for (j, (&p, &fj)) in dist.weights().iter().zip(f).enumerate() {
        if fj.is_nan() || fj < 0.0 {
            return Err(Error::InvalidConfig(format!("frequency {fj} for bin {j}")));
        }
        if p == 0.0 {
            continue;
        }
        if fj == 0.0 {
            return Err(Error::ZeroFrequencyPositiveWeight { bin: j });
        }
        denom += p / fj;
    }
    Ok((2.0 * m as f64 + n as f64 - 1.0) / denom)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AePrediction {
    /// `1 / ((1-q)/R_L + q)`.
    pub central: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Aggressive-Empty rate from the rate `rate_on_l` of its inner strategy on
/// the protected set and the weight `q` outside it. The rate is only known
/// up to constants, so a bracket `[(1 - 1/e) v, v]` is returned with it.
pub fn ae_rate_prediction(rate_on_l: f64, q: f64) -> AePrediction {
    let central = 1.0 / ((1.0 - q) / rate_on_l + q);
    AePrediction {
        central,
        lower: (1.0 - (-1.0f64).exp()) * central,
        upper: central,
    }
}
