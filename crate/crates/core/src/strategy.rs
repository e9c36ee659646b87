//! Recycling strategies.
//!
//! Ties are always broken toward the lowest bin index, so deterministic
//! strategies define a single transition table for the exact analyzer.

use std::fmt;
use std::str::FromStr;

use crate::distribution::ProbabilityDistribution;
use crate::game::BinConfiguration;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaseStrategy {
    /// Recycle the bin holding the most balls.
    FullestBin,
    /// Round robin: the first non-empty bin at or after the cursor.
    GoldenGate,
    /// Recycle the bin of a uniformly random ball.
    RandomBall,
    /// Recycle the least-full non-empty bin.
    LeastFullNonEmpty,
}

impl BaseStrategy {
    pub const ALL: [BaseStrategy; 4] = [
        Self::FullestBin,
        Self::GoldenGate,
        Self::RandomBall,
        Self::LeastFullNonEmpty,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::FullestBin => "fullest-bin",
            Self::GoldenGate => "golden-gate",
            Self::RandomBall => "random-ball",
            Self::LeastFullNonEmpty => "least-full",
        }
    }

    pub fn is_stateless(self) -> bool {
        self != Self::GoldenGate
    }
}

/// How Aggressive-Empty chooses its protected set `L`.
///
/// `L` holds every bin of weight at least `threshold` (default `1/m`), topped
/// up with the heaviest remaining bins (lowest index first among equal
/// weights) until it has `size` bins (default `2m`), capped at `n`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LRule {
    pub size: Option<usize>,
    pub threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrategyKind {
    Base(BaseStrategy),
    /// Empty the lightest non-empty bin outside `L`; otherwise run `inner`
    /// on the game induced on `L`.
    AggressiveEmpty { inner: BaseStrategy, l_rule: LRule },
}

impl StrategyKind {
    pub const FULLEST_BIN: Self = Self::Base(BaseStrategy::FullestBin);
    pub const GOLDEN_GATE: Self = Self::Base(BaseStrategy::GoldenGate);
    pub const RANDOM_BALL: Self = Self::Base(BaseStrategy::RandomBall);
    pub const LEAST_FULL: Self = Self::Base(BaseStrategy::LeastFullNonEmpty);

    pub fn aggressive_empty(inner: BaseStrategy) -> Self {
        Self::AggressiveEmpty {
            inner,
            l_rule: LRule::default(),
        }
    }

    /// Stateless strategies have a single internal state.
    pub fn is_stateless(&self) -> bool {
        match self {
            Self::Base(b) => b.is_stateless(),
            Self::AggressiveEmpty { inner, .. } => inner.is_stateless(),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Base(b) => f.write_str(b.name()),
            Self::AggressiveEmpty { inner, .. } => write!(f, "ae:{}", inner.name()),
        }
    }
}

impl FromStr for BaseStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                Error::Parse(format!(
                    "unknown strategy {s:?} (expected fullest-bin, golden-gate, random-ball, least-full, ae:<inner>)"
                ))
            })
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("ae:") {
            Some(inner) => Ok(Self::aggressive_empty(inner.parse()?)),
            None => Ok(Self::Base(s.parse()?)),
        }
    }
}

/// The protected set for Aggressive-Empty, sorted by bin index.
pub fn select_l(dist: &ProbabilityDistribution, m: u64, rule: LRule) -> Vec<usize> {
    let n = dist.n();
    let m = m.max(1);
    let threshold = rule.threshold.unwrap_or(1.0 / m as f64);
    let size = rule
        .size
        .unwrap_or_else(|| usize::try_from(m.saturating_mul(2)).unwrap_or(usize::MAX));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist.p(b).total_cmp(&dist.p(a)).then(a.cmp(&b)));
    let heavy = order.iter().take_while(|&&i| dist.p(i) >= threshold).count();
    let take = heavy.max(size.min(n)).max(1);
    let mut l: Vec<usize> = order[..take].to_vec();
    l.sort_unstable();
    l
}

/// [`select_l`] with the default rule.
pub fn select_default_l(dist: &ProbabilityDistribution, m: u64) -> Vec<usize> {
    select_l(dist, m, LRule::default())
}

/// A possible action of a strategy in a given state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub bin: usize,
    pub prob: f64,
    pub next_internal: usize,
}

#[derive(Clone, Debug)]
struct AeScope {
    members: Vec<usize>,
    /// Bins outside `L`, lightest first (lowest index among equal weights).
    outside_by_weight: Vec<usize>,
}

/// A strategy bound to one game, with its internal state.
#[derive(Clone, Debug)]
pub struct Strategy {
    kind: StrategyKind,
    n: usize,
    /// Golden Gate cursor, as a position in the strategy's scope
    /// (all bins, or `L` for Aggressive-Empty).
    cursor: usize,
    ae: Option<AeScope>,
}

impl Strategy {
    pub fn new(kind: StrategyKind, dist: &ProbabilityDistribution, m: u64) -> Self {
        let n = dist.n();
        let ae = match kind {
            StrategyKind::Base(_) => None,
            StrategyKind::AggressiveEmpty { l_rule, .. } => {
                let members = select_l(dist, m, l_rule);
                let mut in_l = vec![false; n];
                for &i in &members {
                    in_l[i] = true;
                }
                let mut outside_by_weight: Vec<usize> = (0..n).filter(|&i| !in_l[i]).collect();
                outside_by_weight.sort_by(|&a, &b| dist.p(a).total_cmp(&dist.p(b)).then(a.cmp(&b)));
                Some(AeScope {
                    members,
                    outside_by_weight,
                })
            }
        };
        Self {
            kind,
            n,
            cursor: 0,
            ae,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// `L` for Aggressive-Empty.
    pub fn protected_set(&self) -> Option<&[usize]> {
        self.ae.as_ref().map(|a| a.members.as_slice())
    }

    /// Golden Gate's cursor (a position in the strategy's scope).
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn set_cursor(&mut self, cursor: usize) {
        self.cursor = cursor % self.scope_len();
    }

    fn base(&self) -> BaseStrategy {
        match self.kind {
            StrategyKind::Base(b) => b,
            StrategyKind::AggressiveEmpty { inner, .. } => inner,
        }
    }

    fn scope_len(&self) -> usize {
        self.ae.as_ref().map_or(self.n, |a| a.members.len())
    }

    #[inline]
    fn scope_bin(&self, j: usize) -> usize {
        match &self.ae {
            Some(a) => a.members[j],
            None => j,
        }
    }

    /// Number of internal states (Golden Gate cursor positions; 1 otherwise).
    pub fn internal_states(&self) -> usize {
        if self.base() == BaseStrategy::GoldenGate {
            self.scope_len()
        } else {
            1
        }
    }

    fn aggressive_target(&self, counts: &[u64]) -> Option<usize> {
        let ae = self.ae.as_ref()?;
        ae.outside_by_weight.iter().copied().find(|&i| counts[i] > 0)
    }

    /// Deterministic choice within the scope; `None` for Random Ball.
    /// Returns `(bin, next cursor)`.
    fn choose(&self, counts: &[u64], cursor: usize) -> Result<Option<(usize, usize)>> {
        let len = self.scope_len();
        let count = |j: usize| counts[self.scope_bin(j)];
        let pick = match self.base() {
            BaseStrategy::RandomBall => return Ok(None),
            BaseStrategy::FullestBin => {
                let mut best = 0;
                for j in 1..len {
                    if count(j) > count(best) {
                        best = j;
                    }
                }
                (count(best) > 0).then_some((best, cursor))
            }
            BaseStrategy::LeastFullNonEmpty => {
                let mut best: Option<usize> = None;
                for j in 0..len {
                    let c = count(j);
                    if c > 0 && best.is_none_or(|b| c < count(b)) {
                        best = Some(j);
                    }
                }
                best.map(|b| (b, cursor))
            }
            BaseStrategy::GoldenGate => (0..len)
                .map(|off| (cursor + off) % len)
                .find(|&j| count(j) > 0)
                .map(|j| (j, (j + 1) % len)),
        };
        let (j, next) = pick.ok_or(Error::AllBinsEmpty)?;
        Ok(Some((self.scope_bin(j), next)))
    }

    /// Picks a non-empty bin and advances internal state.
    pub fn pick(&mut self, config: &BinConfiguration, rng: &mut Rng) -> Result<usize> {
        let counts = config.counts();
        if config.m() == 0 {
            return Err(Error::AllBinsEmpty);
        }
        if let Some(bin) = self.aggressive_target(counts) {
            return Ok(bin);
        }
        debug_assert!(self.ae.as_ref().is_none_or(|ae| ae
            .outside_by_weight
            .iter()
            .all(|&i| counts[i] == 0)));
        let bin = match self.choose(counts, self.cursor)? {
            Some((bin, next)) => {
                self.cursor = next;
                bin
            }
            None => {
                // Random Ball: every ball is in scope here.
                let mut r = rng.below(config.m());
                let mut chosen = None;
                for j in 0..self.scope_len() {
                    let c = counts[self.scope_bin(j)];
                    if r < c {
                        chosen = Some(self.scope_bin(j));
                        break;
                    }
                    r -= c;
                }
                chosen.ok_or(Error::AllBinsEmpty)?
            }
        };
        debug_assert!(counts[bin] > 0, "picked empty bin {bin}");
        Ok(bin)
    }

    /// Every action available in `(counts, internal)` with its probability.
    /// Used by the exact analyzer; consistent with [`Strategy::pick`].
    pub fn actions(&self, counts: &[u64], internal: usize) -> Result<Vec<Action>> {
        let m: u64 = counts.iter().sum();
        if m == 0 {
            return Err(Error::AllBinsEmpty);
        }
        if let Some(bin) = self.aggressive_target(counts) {
            return Ok(vec![Action {
                bin,
                prob: 1.0,
                next_internal: internal,
            }]);
        }
        Ok(match self.choose(counts, internal)? {
            Some((bin, next)) => vec![Action {
                bin,
                prob: 1.0,
                next_internal: if self.internal_states() > 1 { next } else { 0 },
            }],
            None => (0..self.scope_len())
                .map(|j| self.scope_bin(j))
                .filter(|&b| counts[b] > 0)
                .map(|bin| Action {
                    bin,
                    prob: counts[bin] as f64 / m as f64,
                    next_internal: internal,
                })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{make_skyscraper, make_uniform};
    use super::Strategy;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn cfg(x: &[u64]) -> BinConfiguration {
        BinConfiguration::new(x.to_vec()).unwrap()
    }

    fn pick_once(kind: StrategyKind, x: &[u64], dist: &ProbabilityDistribution) -> usize {
        let m = x.iter().sum();
        Strategy::new(kind, dist, m).pick(&cfg(x), &mut Rng::new(0)).unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["fullest-bin", "golden-gate", "random-ball", "least-full", "ae:random-ball", "ae:golden-gate"] {
            assert_eq!(s.parse::<StrategyKind>().unwrap().to_string(), s);
        }
        assert!("ae:ae:random-ball".parse::<StrategyKind>().is_err());
        assert!("greedy".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn fullest_bin_examples() {
        let u = make_uniform(3).unwrap();
        assert_eq!(pick_once(StrategyKind::FULLEST_BIN, &[3, 1, 2], &u), 0);
        assert_eq!(pick_once(StrategyKind::FULLEST_BIN, &[2, 2, 0], &u), 0);
        assert_eq!(pick_once(StrategyKind::FULLEST_BIN, &[0, 1, 2], &u), 2);
    }

    #[test]
    fn least_full_examples() {
        let u = make_uniform(4).unwrap();
        assert_eq!(pick_once(StrategyKind::LEAST_FULL, &[3, 0, 2, 2], &u), 2);
        assert_eq!(pick_once(StrategyKind::LEAST_FULL, &[0, 0, 0, 5], &u), 3);
    }

    #[test]
    fn golden_gate_successor() {
        let u = make_uniform(3).unwrap();
        let mut s = Strategy::new(StrategyKind::GOLDEN_GATE, &u, 4);
        s.set_cursor(1);
        assert_eq!(s.pick(&cfg(&[1, 0, 3]), &mut Rng::new(0)).unwrap(), 2);
        assert_eq!(s.cursor(), 0);
        assert_eq!(s.pick(&cfg(&[1, 0, 3]), &mut Rng::new(0)).unwrap(), 0);
        assert_eq!(s.cursor(), 1);
    }

    #[test]
    fn random_ball_frequency() {
        let u = make_uniform(3).unwrap();
        let mut s = Strategy::new(StrategyKind::RANDOM_BALL, &u, 4);
        let mut rng = Rng::new(11);
        let c = cfg(&[2, 0, 2]);
        let trials = 100_000;
        let mut zero = 0;
        for _ in 0..trials {
            match s.pick(&c, &mut rng).unwrap() {
                0 => zero += 1,
                2 => {}
                b => panic!("picked empty bin {b}"),
            }
        }
        let f = zero as f64 / trials as f64;
        assert!((f - 0.5).abs() < 0.01, "f = {f}");
    }

    #[test]
    fn random_ball_chi_square() {
        // df = 3 at significance 0.001.
        const CRIT: f64 = 16.266_236_196_238_13;
        let x = [5u64, 1, 0, 3, 7];
        let d = make_uniform(5).unwrap();
        let mut s = Strategy::new(StrategyKind::RANDOM_BALL, &d, 16);
        let mut rng = Rng::new(99);
        let trials = 100_000u64;
        let mut hits = [0u64; 5];
        for _ in 0..trials {
            hits[s.pick(&cfg(&x), &mut rng).unwrap()] += 1;
        }
        assert_eq!(hits[2], 0);
        let chi2: f64 = x
            .iter()
            .zip(hits)
            .filter(|(&xi, _)| xi > 0)
            .map(|(&xi, h)| {
                let e = trials as f64 * xi as f64 / 16.0;
                (h as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < CRIT, "chi2 = {chi2}");
    }

    #[test]
    fn aggressive_empty_targets_lightest_outside() {
        let d = ProbabilityDistribution::from_weights(vec![0.7, 0.2, 0.06, 0.04]).unwrap();
        let kind = StrategyKind::AggressiveEmpty {
            inner: BaseStrategy::FullestBin,
            l_rule: LRule {
                size: Some(2),
                threshold: None,
            },
        };
        let s = Strategy::new(kind, &d, 4);
        assert_eq!(s.protected_set().unwrap(), &[0, 1]);
        assert_eq!(pick_once(kind, &[0, 2, 1, 1], &d), 3);
        assert_eq!(pick_once(kind, &[0, 2, 1, 0], &d), 2);
        // Delegates to the inner strategy once everything is inside L.
        assert_eq!(pick_once(kind, &[1, 3, 0, 0], &d), 1);
    }

    #[test]
    fn default_l_examples() {
        let u = make_uniform(7).unwrap();
        assert_eq!(select_default_l(&u, 7), (0..7).collect::<Vec<_>>());
        assert_eq!(select_default_l(&u, 30), (0..7).collect::<Vec<_>>());
        let u = make_uniform(100).unwrap();
        assert_eq!(select_default_l(&u, 10), (0..20).collect::<Vec<_>>());
        let sky = make_skyscraper(100).unwrap();
        let l = select_default_l(&sky, 5);
        assert_eq!(l.len(), 10);
        assert_eq!(l, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn l_keeps_every_heavy_bin() {
        let d = ProbabilityDistribution::from_weights(vec![0.3, 0.3, 0.3, 0.1]).unwrap();
        let rule = LRule {
            size: Some(1),
            threshold: Some(0.25),
        };
        assert_eq!(select_l(&d, 2, rule), vec![0, 1, 2]);
    }

    #[test]
    fn actions_match_random_ball_weights() {
        let u = make_uniform(3).unwrap();
        let s = Strategy::new(StrategyKind::RANDOM_BALL, &u, 4);
        let acts = s.actions(&[1, 0, 3], 0).unwrap();
        assert_eq!(acts.len(), 2);
        assert_eq!((acts[0].bin, acts[0].prob), (0, 0.25));
        assert_eq!((acts[1].bin, acts[1].prob), (2, 0.75));
    }

    #[test]
    fn empty_game_is_an_error() {
        let u = make_uniform(3).unwrap();
        let mut s = Strategy::new(StrategyKind::FULLEST_BIN, &u, 0);
        assert!(matches!(s.pick(&cfg(&[0, 0, 0]), &mut Rng::new(0)), Err(Error::AllBinsEmpty)));
    }

    fn any_kind() -> impl proptest::strategy::Strategy<Value = StrategyKind> {
        prop_oneof![
            Just(StrategyKind::FULLEST_BIN),
            Just(StrategyKind::GOLDEN_GATE),
            Just(StrategyKind::RANDOM_BALL),
            Just(StrategyKind::LEAST_FULL),
            Just(StrategyKind::aggressive_empty(BaseStrategy::RandomBall)),
            Just(StrategyKind::aggressive_empty(BaseStrategy::GoldenGate)),
            Just(StrategyKind::aggressive_empty(BaseStrategy::FullestBin)),
        ]
    }

    proptest! {
        #[test]
        fn never_picks_an_empty_bin(
            kind in any_kind(),
            x in prop::collection::vec(0u64..5, 1..12),
            raw in prop::collection::vec(0.01f64..1.0, 12),
            seed in any::<u64>(),
        ) {
            prop_assume!(x.iter().any(|&c| c > 0));
            let d = ProbabilityDistribution::from_weights(raw[..x.len()].to_vec()).unwrap();
            let m = x.iter().sum();
            let mut s = Strategy::new(kind, &d, m);
            let mut rng = Rng::new(seed);
            for _ in 0..5 {
                let b = s.pick(&cfg(&x), &mut rng).unwrap();
                prop_assert!(x[b] > 0);
            }
            for internal in 0..s.internal_states() {
                let acts = s.actions(&x, internal).unwrap();
                let total: f64 = acts.iter().map(|a| a.prob).sum();
                prop_assert!((total - 1.0).abs() < 1e-12);
                prop_assert!(acts.iter().all(|a| x[a.bin] > 0));
            }
        }

        #[test]
        fn deterministic_strategies_repeat(x in prop::collection::vec(0u64..6, 1..10)) {
            prop_assume!(x.iter().any(|&c| c > 0));
            let d = make_uniform(x.len()).unwrap();
            for kind in [StrategyKind::FULLEST_BIN, StrategyKind::LEAST_FULL] {
                let a = pick_once(kind, &x, &d);
                let b = Strategy::new(kind, &d, 1).pick(&cfg(&x), &mut Rng::new(12345)).unwrap();
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn golden_gate_visits_persistent_bins(x in prop::collection::vec(0u64..3, 1..12), start in 0usize..12) {
            prop_assume!(x.iter().any(|&c| c > 0));
            let n = x.len();
            let d = make_uniform(n).unwrap();
            let mut s = Strategy::new(StrategyKind::GOLDEN_GATE, &d, 1);
            s.set_cursor(start);
            let mut seen = vec![false; n];
            for _ in 0..n {
                seen[s.pick(&cfg(&x), &mut Rng::new(0)).unwrap()] = true;
            }
            for i in 0..n {
                prop_assert_eq!(seen[i], x[i] > 0);
            }
        }
    }
}
