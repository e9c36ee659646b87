//! Bin-weight distributions.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::{Error, Result};

/// A probability vector over `n` bins, with a cumulative table for sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityDistribution {
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ProbabilityDistribution {
    /// Normalizes non-negative raw weights to sum to one.
    pub fn from_weights(raw: impl Into<Vec<f64>>) -> Result<Self> {
        let mut weights = raw.into();
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no weights".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {i} is {w}; weights must be finite and non-negative"
                )));
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        if total != 1.0 {
            for w in &mut weights {
                *w /= total;
            }
        }
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, &w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            weights,
            cumulative,
        })
    }

    /// Reads one non-negative decimal per line. Blank lines and `#` comments
    /// are skipped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse_weights(&text)
            .map_err(|e| Error::InvalidDistribution(format!("{}: {e}", path.display())))
    }

    pub fn parse_weights(text: &str) -> Result<Self> {
        let mut raw = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let w: f64 = line
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: not a number: {line:?}", lineno + 1)))?;
            raw.push(w);
        }
        if raw.is_empty() {
            return Err(Error::InvalidDistribution("empty weights file".into()));
        }
        Self::from_weights(raw)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn p(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.weights[0];
        self.weights.iter().all(|&w| w == first)
    }

    /// Inverse-CDF lookup: the bin whose cumulative interval contains
    /// `u * total`. Zero-weight bins have empty intervals and are never hit.
    #[inline]
    pub fn bin_for(&self, u: f64) -> usize {
        let total = *self.cumulative.last().unwrap();
        let x = u * total;
        let i = self.cumulative.partition_point(|&c| c <= x);
        if i < self.weights.len() {
            i
        } else {
            // `u * total` rounded up to `total`.
            self.weights.iter().rposition(|&w| w > 0.0).unwrap()
        }
    }

    /// The distribution conditioned on `bins` (renormalized), in the order given.
    pub fn restrict(&self, bins: &[usize]) -> Result<Self> {
        Self::from_weights(bins.iter().map(|&i| self.weights[i]).collect::<Vec<_>>())
    }
}

/// `(sum_i sqrt(p_i))^2`, always in `[1, n]`.
pub fn half_quasi_norm(dist: &ProbabilityDistribution) -> f64 {
    let s: f64 = dist.weights.iter().map(|w| w.sqrt()).sum();
    s * s
}

pub fn make_uniform(n: usize) -> Result<ProbabilityDistribution> {
    if n == 0 {
        return Err(Error::InvalidBinCount { n, min: 1 });
    }
    ProbabilityDistribution::from_weights(vec![1.0 / n as f64; n])
}

/// One heavy bin (index 0) of weight `1 - 1/n + 1/n^2`; the rest `1/n^2`.
pub fn make_skyscraper(n: usize) -> Result<ProbabilityDistribution> {
    if n < 2 {
        return Err(Error::InvalidBinCount { n, min: 2 });
    }
    let nf = n as f64;
    let light = 1.0 / (nf * nf);
    let mut w = vec![light; n];
    w[0] = 1.0 - 1.0 / nf + light;
    ProbabilityDistribution::from_weights(w)
}

/// Weights proportional to `1 / (i + 1)^s`.
pub fn make_power_law(n: usize, s: f64) -> Result<ProbabilityDistribution> {
    if n == 0 {
        return Err(Error::InvalidBinCount { n, min: 1 });
    }
    if !s.is_finite() || s < 0.0 {
        return Err(Error::InvalidDistribution(format!(
            "power-law exponent must be finite and >= 0, got {s}"
        )));
    }
    ProbabilityDistribution::from_weights(
        (0..n).map(|i| ((i + 1) as f64).powf(-s)).collect::<Vec<_>>(),
    )
}

/// A distribution family named on the command line:
/// `uniform`, `skyscraper`, `powerlaw:<s>` or `file:<path>`.
#[derive(Clone, Debug, PartialEq)]
pub enum NamedDistribution {
    Uniform,
    Skyscraper,
    PowerLaw(f64),
    File(PathBuf),
}

impl NamedDistribution {
    /// Builds the distribution over `n` bins. For `file:` the bin count comes
    /// from the file; a given `n` must then match it.
    pub fn materialize(&self, n: Option<usize>) -> Result<ProbabilityDistribution> {
        let need_n = || {
            n.ok_or_else(|| Error::InvalidConfig(format!("distribution {self} needs a bin count")))
        };
        match self {
            Self::Uniform => make_uniform(need_n()?),
            Self::Skyscraper => make_skyscraper(need_n()?),
            Self::PowerLaw(s) => make_power_law(need_n()?, *s),
            Self::File(path) => {
                let d = ProbabilityDistribution::load(path)?;
                match n {
                    Some(n) if n != d.n() => Err(Error::InvalidConfig(format!(
                        "{} has {} weights but n = {n}",
                        path.display(),
                        d.n()
                    ))),
                    _ => Ok(d),
                }
            }
        }
    }
}

impl fmt::Display for NamedDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("uniform"),
            Self::Skyscraper => f.write_str("skyscraper"),
            Self::PowerLaw(s) => write!(f, "powerlaw:{s}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for NamedDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => return Ok(Self::Uniform),
            "skyscraper" => return Ok(Self::Skyscraper),
            _ => {}
        }
        if let Some(exp) = s.strip_prefix("powerlaw:") {
            let v: f64 = exp
                .parse()
                .map_err(|_| Error::Parse(format!("bad power-law exponent {exp:?}")))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse(format!("power-law exponent must be >= 0, got {exp}")));
            }
            return Ok(Self::PowerLaw(v));
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(Error::Parse("file: needs a path".into()));
            }
            return Ok(Self::File(PathBuf::from(path)));
        }
        Err(Error::Parse(format!(
            "unknown distribution {s:?} (expected uniform, skyscraper, powerlaw:<s>, file:<path>)"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(make_uniform(1).unwrap().weights(), &[1.0]);
        assert_eq!(make_uniform(4).unwrap().weights(), &[0.25; 4]);
        assert!(close(half_quasi_norm(&make_uniform(10).unwrap()), 10.0, 1e-12));
        assert!(matches!(make_uniform(0), Err(Error::InvalidBinCount { n: 0, .. })));
    }

    #[test]
    fn skyscraper_examples() {
        assert_eq!(make_skyscraper(2).unwrap().weights(), &[0.75, 0.25]);
        assert_eq!(
            make_skyscraper(4).unwrap().weights(),
            &[0.8125, 0.0625, 0.0625, 0.0625]
        );
        for n in 2..200 {
            let s: f64 = make_skyscraper(n).unwrap().weights().iter().sum();
            assert!(close(s, 1.0, 1e-12), "n={n} sum={s}");
        }
        assert!(make_skyscraper(1).is_err());
    }

    #[test]
    fn power_law_examples() {
        assert_eq!(make_power_law(5, 0.0).unwrap(), make_uniform(5).unwrap());
        let d = make_power_law(2, 1.0).unwrap();
        assert!(close(d.p(0), 2.0 / 3.0, 1e-15) && close(d.p(1), 1.0 / 3.0, 1e-15));
        let d = make_power_law(3, 2.0).unwrap();
        for (got, want) in d.weights().iter().zip([36.0 / 49.0, 9.0 / 49.0, 4.0 / 49.0]) {
            assert!(close(*got, want, 1e-15));
        }
    }

    #[test]
    fn half_quasi_norm_examples() {
        let point = ProbabilityDistribution::from_weights(vec![0.0, 1.0, 0.0]).unwrap();
        assert!(close(half_quasi_norm(&point), 1.0, 1e-15));
        let want = (0.8125f64.sqrt() + 0.75).powi(2);
        let got = half_quasi_norm(&make_skyscraper(4).unwrap());
        assert!(close(got, want, 1e-12));
        assert!(close(got, 2.7271, 1e-4));
    }

    #[test]
    fn loader_normalizes_and_rejects_garbage() {
        let d = ProbabilityDistribution::parse_weights("1\n3\n\n# note\n").unwrap();
        assert_eq!(d.weights(), &[0.25, 0.75]);
        assert!(ProbabilityDistribution::parse_weights("").is_err());
        assert!(ProbabilityDistribution::parse_weights("1\n-2\n").is_err());
        assert!(ProbabilityDistribution::parse_weights("NaN\n").is_err());
        assert!(ProbabilityDistribution::parse_weights("0\n0\n").is_err());
        assert!(ProbabilityDistribution::parse_weights("abc\n").is_err());
    }

    #[test]
    fn named_syntax() {
        assert_eq!("uniform".parse::<NamedDistribution>().unwrap(), NamedDistribution::Uniform);
        assert_eq!(
            "powerlaw:1.5".parse::<NamedDistribution>().unwrap(),
            NamedDistribution::PowerLaw(1.5)
        );
        assert_eq!(
            "file:/tmp/w.txt".parse::<NamedDistribution>().unwrap(),
            NamedDistribution::File("/tmp/w.txt".into())
        );
        assert!("powerlaw:-1".parse::<NamedDistribution>().is_err());
        assert!("zipf".parse::<NamedDistribution>().is_err());
        assert!(NamedDistribution::Uniform.materialize(None).is_err());
    }

    #[test]
    fn zero_weight_bins_are_never_sampled() {
        let d = ProbabilityDistribution::from_weights(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        for k in 0..=1000 {
            let b = d.bin_for(k as f64 / 1000.0 * (1.0 - f64::EPSILON));
            assert!(b == 1 || b == 3);
        }
        assert_eq!(d.bin_for(1.0), 3);
        assert_eq!(d.bin_for(0.0), 1);
    }

    proptest! {
        #[test]
        fn half_quasi_norm_between_one_and_n(raw in prop::collection::vec(0.0f64..10.0, 1..40)) {
            prop_assume!(raw.iter().any(|&w| w > 0.0));
            let d = ProbabilityDistribution::from_weights(raw).unwrap();
            let h = half_quasi_norm(&d);
            prop_assert!(h >= 1.0 - 1e-12 && h <= d.n() as f64 + 1e-9);
            let s: f64 = d.weights().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn named_constructors_are_valid(n in 2usize..300, s in 0.0f64..4.0) {
            for d in [make_uniform(n).unwrap(), make_skyscraper(n).unwrap(), make_power_law(n, s).unwrap()] {
                prop_assert_eq!(d.n(), n);
                prop_assert!(d.weights().iter().all(|&w| w >= 0.0));
                let sum: f64 = d.weights().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }
}
