//! An insertion buffer in front of a growing set of B-tree leaves.
//!
//! Keys arrive i.i.d. from a [`KeyDistribution`] and wait in a bounded
//! buffer, grouped by destination leaf. When the buffer is full, a
//! [`FlushPolicy`] picks a leaf and all of its buffered keys are written to
//! it. Leaves that overflow split at their median key. The recycle rate is
//! the mean number of keys written per flush.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Normal};

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KeyDistribution {
    Uniform { lo: f64, hi: f64 },
    Pareto { alpha: f64, x_min: f64 },
    Normal { mu: f64, sigma: f64 },
}

impl KeyDistribution {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            Self::Pareto { alpha, x_min } => alpha > 0.0 && alpha.is_finite() && x_min > 0.0 && x_min.is_finite(),
            Self::Normal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad key distribution {self}")))
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Self::Pareto { .. } => 1.0 - self.sf(x),
            Self::Normal { mu, sigma } => 0.5 * libm::erfc(-(x - mu) / (sigma * std::f64::consts::SQRT_2)),
        }
    }

    /// `1 - cdf(x)`, computed without cancellation in the upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match *self {
            Self::Uniform { .. } => 1.0 - self.cdf(x),
            Self::Pareto { alpha, x_min } => {
                if x <= x_min {
                    1.0
                } else {
                    (x_min / x).powf(alpha)
                }
            }
            Self::Normal { mu, sigma } => 0.5 * libm::erfc((x - mu) / (sigma * std::f64::consts::SQRT_2)),
        }
    }

    /// Probability of `[lo, hi)`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        let upper_tail = match *self {
            Self::Uniform { .. } => false,
            Self::Pareto { .. } => true,
            Self::Normal { mu, .. } => lo >= mu,
        };
        let m = if upper_tail {
            self.sf(lo) - self.sf(hi)
        } else {
            self.cdf(hi) - self.cdf(lo)
        };
        m.max(0.0)
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => lo + u * (hi - lo),
            Self::Pareto { alpha, x_min } => x_min * (1.0 - u).powf(-1.0 / alpha),
            Self::Normal { mu, sigma } => {
                if u <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                if u >= 1.0 {
                    return f64::INFINITY;
                }
                let (mut a, mut b) = (mu - 40.0 * sigma, mu + 40.0 * sigma);
                for _ in 0..200 {
                    let mid = 0.5 * (a + b);
                    if self.cdf(mid) < u {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                0.5 * (a + b)
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            Self::Uniform { lo, hi } => lo + rng.uniform() * (hi - lo),
            // 1 - u lies in (0, 1], so the key is finite.
            Self::Pareto { alpha, x_min } => x_min * (1.0 - rng.uniform()).powf(-1.0 / alpha),
            Self::Normal { mu, sigma } => Normal::new(mu, sigma).expect("validated").sample(rng),
        }
    }
}

impl fmt::Display for KeyDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Uniform { lo, hi } => write!(f, "uniform:{lo}:{hi}"),
            Self::Pareto { alpha, x_min } => write!(f, "pareto:{alpha}:{x_min}"),
            Self::Normal { mu, sigma } => write!(f, "normal:{mu}:{sigma}"),
        }
    }
}

impl FromStr for KeyDistribution {
    type Err = Error;

    /// `uniform[:lo:hi]`, `pareto:alpha[:x_min]`, `normal[:mu:sigma]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let nums = parts
            .map(|p| p.parse::<f64>().map_err(|_| Error::Parse(format!("bad number {p:?} in {s:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        let d = match (name, nums.as_slice()) {
            ("uniform", []) => Self::Uniform { lo: 0.0, hi: 1000.0 },
            ("uniform", [lo, hi]) => Self::Uniform { lo: *lo, hi: *hi },
            ("pareto", [alpha]) => Self::Pareto { alpha: *alpha, x_min: 1.0 },
            ("pareto", [alpha, x_min]) => Self::Pareto {
                alpha: *alpha,
                x_min: *x_min,
            },
            ("normal", []) => Self::Normal { mu: 0.0, sigma: 1000.0 },
            ("normal", [mu, sigma]) => Self::Normal { mu: *mu, sigma: *sigma },
            _ => return Err(Error::Parse(format!("unknown key distribution {s:?}"))),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FlushPolicy {
    FullestBin,
    GoldenGate,
    RandomBall,
}

impl FlushPolicy {
    pub const ALL: [FlushPolicy; 3] = [Self::FullestBin, Self::GoldenGate, Self::RandomBall];

    pub fn name(self) -> &'static str {
        match self {
            Self::FullestBin => "fullest-bin",
            Self::GoldenGate => "golden-gate",
            Self::RandomBall => "random-ball",
        }
    }
}

impl fmt::Display for FlushPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FlushPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown flush policy {s:?}")))
    }
}

/// `f64` ordered by `total_cmp`, for use as a map key.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Clone, Debug)]
struct Leaf {
    low: f64,
    high: f64,
    count: u64,
    /// Resident keys; kept only while splitting is enabled.
    keys: Vec<f64>,
}

/// The leaf level: disjoint intervals `[low, high)` covering the real line.
/// Leaf ids are stable; a split keeps the original id for the lowest part.
#[derive(Clone, Debug)]
pub struct BTreeModel {
    leaves: Vec<Leaf>,
    by_low: BTreeMap<Key, usize>,
    capacity: usize,
    splits: bool,
}

impl BTreeModel {
    /// One leaf covering everything.
    pub fn new(leaf_capacity: usize) -> Result<Self> {
        if leaf_capacity < 2 {
            return Err(Error::InvalidConfig("leaf capacity must be at least 2".into()));
        }
        Ok(Self::from_bounds(&[], leaf_capacity, true))
    }

    /// `leaves` leaves of equal probability under `dist`; splitting disabled.
    pub fn frozen(dist: &KeyDistribution, leaves: usize) -> Result<Self> {
        if leaves == 0 {
            return Err(Error::InvalidConfig("need at least one leaf".into()));
        }
        let bounds: Vec<f64> = (1..leaves).map(|i| dist.quantile(i as f64 / leaves as f64)).collect();
        if bounds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!("{leaves} leaves is too many for {dist}")));
        }
        Ok(Self::from_bounds(&bounds, usize::MAX, false))
    }

    fn from_bounds(inner: &[f64], capacity: usize, splits: bool) -> Self {
        let mut edges = vec![f64::NEG_INFINITY];
        edges.extend_from_slice(inner);
        edges.push(f64::INFINITY);
        let leaves: Vec<Leaf> = edges
            .windows(2)
            .map(|w| Leaf {
                low: w[0],
                high: w[1],
                count: 0,
                keys: Vec::new(),
            })
            .collect();
        let by_low = leaves.iter().enumerate().map(|(i, l)| (Key(l.low), i)).collect();
        Self {
            leaves,
            by_low,
            capacity,
            splits,
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_capacity(&self) -> usize {
        self.capacity
    }

    pub fn splits_enabled(&self) -> bool {
        self.splits
    }

    /// Id of the leaf whose interval contains `key`.
    pub fn leaf_for(&self, key: f64) -> usize {
        *self
            .by_low
            .range(..=Key(key))
            .next_back()
            .expect("first leaf starts at -inf")
            .1
    }

    /// `(low, high)` of a leaf.
    pub fn bounds(&self, id: usize) -> (f64, f64) {
        (self.leaves[id].low, self.leaves[id].high)
    }

    pub fn resident(&self, id: usize) -> u64 {
        self.leaves[id].count
    }

    /// Leaf ids in key order.
    pub fn ids_in_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_low.values().copied()
    }

    pub fn total_resident(&self) -> u64 {
        self.leaves.iter().map(|l| l.count).sum()
    }

    /// Writes keys into leaf `id`, splitting on overflow. Returns the ids of
    /// leaves created by splits.
    fn apply(&mut self, id: usize, keys: Vec<f64>) -> Vec<usize> {
        let leaf = &mut self.leaves[id];
        leaf.count += keys.len() as u64;
        if !self.splits {
            return Vec::new();
        }
        leaf.keys.extend(keys);
        let mut created = Vec::new();
        let mut stack = vec![id];
        while let Some(id) = stack.pop() {
            if self.leaves[id].keys.len() <= self.capacity {
                continue;
            }
            let Some(new_id) = self.split(id) else {
                continue;
            };
            created.push(new_id);
            stack.push(id);
            stack.push(new_id);
        }
        created
    }

    /// Splits leaf `id` at its median key. Keys equal to the boundary go to
    /// the upper part, so the cut moves to the nearest change of key value.
    /// A leaf whose keys are all identical cannot be split.
    fn split(&mut self, id: usize) -> Option<usize> {
        let leaf = &mut self.leaves[id];
        leaf.keys.sort_by(f64::total_cmp);
        let keys = &leaf.keys;
        let len = keys.len();
        let target = len.div_ceil(2);
        let valid = |i: usize| i > 0 && i < len && keys[i - 1] < keys[i];
        let cut = (0..len).find_map(|d| {
            if target >= d && valid(target - d) {
                Some(target - d)
            } else if valid(target + d) {
                Some(target + d)
            } else {
                None
            }
        })?;
        let upper = leaf.keys.split_off(cut);
        let boundary = upper[0];
        let high = leaf.high;
        leaf.high = boundary;
        leaf.count = leaf.keys.len() as u64;
        let new_id = self.leaves.len();
        self.leaves.push(Leaf {
            low: boundary,
            high,
            count: upper.len() as u64,
            keys: upper,
        });
        self.by_low.insert(Key(boundary), new_id);
        Some(new_id)
    }
}

/// Fenwick tree over leaf ids holding buffered-group sizes.
#[derive(Clone, Debug, Default)]
struct Fenwick {
    tree: Vec<u64>,
    values: Vec<u64>,
}

impl Fenwick {
    fn ensure(&mut self, len: usize) {
        if len <= self.values.len() {
            return;
        }
        self.values.resize(len.next_power_of_two(), 0);
        let size = self.values.len();
        self.tree = vec![0; size + 1];
        for i in 0..size {
            let mut j = i + 1;
            let v = self.values[i];
            if v == 0 {
                continue;
            }
            while j <= size {
                self.tree[j] += v;
                j += j & j.wrapping_neg();
            }
        }
    }

    fn set(&mut self, i: usize, v: u64) {
        self.ensure(i + 1);
        let old = std::mem::replace(&mut self.values[i], v);
        let mut j = i + 1;
        while j < self.tree.len() {
            self.tree[j] = self.tree[j].wrapping_add(v.wrapping_sub(old));
            j += j & j.wrapping_neg();
        }
    }

    /// Smallest index whose prefix sum exceeds `r`.
    fn find(&self, mut r: u64) -> usize {
        let size = self.values.len();
        let mut pos = 0;
        let mut step = size.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= size && self.tree[next] <= r {
                pos = next;
                r -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Keys waiting to be written, grouped by destination leaf, with the index
/// each policy needs.
#[derive(Clone, Debug)]
pub struct InsertBuffer {
    capacity: usize,
    len: usize,
    groups: Vec<Vec<f64>>,
    by_size: BTreeSet<(Reverse<usize>, usize)>,
    nonempty_by_low: BTreeMap<Key, usize>,
    weights: Fenwick,
}

impl InsertBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("buffer capacity must be at least 1".into()));
        }
        Ok(Self {
            capacity,
            len: 0,
            groups: Vec::new(),
            by_size: BTreeSet::new(),
            nonempty_by_low: BTreeMap::new(),
            weights: Fenwick::default(),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_full(&self) -> bool {
        self.len >= self.capacity
    }

    /// Buffered keys destined to leaf `id`.
    pub fn group_len(&self, id: usize) -> usize {
        self.groups.get(id).map_or(0, Vec::len)
    }

    fn push(&mut self, id: usize, low: f64, key: f64) {
        if self.groups.len() <= id {
            self.groups.resize_with(id + 1, Vec::new);
        }
        let old = self.groups[id].len();
        self.groups[id].push(key);
        if old > 0 {
            self.by_size.remove(&(Reverse(old), id));
        } else {
            self.nonempty_by_low.insert(Key(low), id);
        }
        self.by_size.insert((Reverse(old + 1), id));
        self.weights.set(id, old as u64 + 1);
        self.len += 1;
    }

    fn take(&mut self, id: usize, low: f64) -> Vec<f64> {
        let keys = std::mem::take(&mut self.groups[id]);
        if !keys.is_empty() {
            self.by_size.remove(&(Reverse(keys.len()), id));
            self.nonempty_by_low.remove(&Key(low));
            self.weights.set(id, 0);
            self.len -= keys.len();
        }
        keys
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FlushEvent {
    pub leaf: usize,
    pub count: usize,
}

/// A model, its buffer and the state of the flush policy.
#[derive(Clone, Debug)]
pub struct BufferedTree {
    pub model: BTreeModel,
    pub buffer: InsertBuffer,
    policy: FlushPolicy,
    /// Golden Gate: upper bound of the last leaf flushed.
    cursor: f64,
    inserted: u64,
    flushes: u64,
}

impl BufferedTree {
    pub fn new(model: BTreeModel, buffer: InsertBuffer, policy: FlushPolicy) -> Self {
        Self {
            model,
            buffer,
            policy,
            cursor: f64::NEG_INFINITY,
            inserted: 0,
            flushes: 0,
        }
    }

    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    pub fn flushes(&self) -> u64 {
        self.flushes
    }

    /// Buffers `key`; if the buffer is already full, flushes first.
    pub fn insert_key(&mut self, key: f64, rng: &mut Rng) -> Result<Option<FlushEvent>> {
        if !key.is_finite() {
            return Err(Error::InvalidConfig(format!("key {key} is not finite")));
        }
        let event = if self.buffer.is_full() { Some(self.flush(rng)?) } else { None };
        let id = self.model.leaf_for(key);
        self.buffer.push(id, self.model.leaves[id].low, key);
        self.inserted += 1;
        Ok(event)
    }

    /// Leaf the policy would flush next.
    fn choose(&self, rng: &mut Rng) -> Result<usize> {
        if self.buffer.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok(match self.policy {
            FlushPolicy::FullestBin => self.buffer.by_size.first().expect("non-empty").1,
            FlushPolicy::GoldenGate => {
                let groups = &self.buffer.nonempty_by_low;
                *groups
                    .range(Key(self.cursor)..)
                    .next()
                    .or_else(|| groups.iter().next())
                    .expect("non-empty")
                    .1
            }
            FlushPolicy::RandomBall => self.buffer.weights.find(rng.below(self.buffer.len as u64)),
        })
    }

    /// Writes every buffered key of the chosen leaf.
    pub fn flush(&mut self, rng: &mut Rng) -> Result<FlushEvent> {
        let id = self.choose(rng)?;
        let (low, high) = self.model.bounds(id);
        let keys = self.buffer.take(id, low);
        let count = keys.len();
        debug_assert!(count > 0);
        let created = self.model.apply(id, keys);
        // The split leaf's group was just drained, so no buffered key needs
        // to move to a new leaf.
        debug_assert!(created.iter().all(|&c| self.buffer.group_len(c) == 0));
        self.cursor = high;
        self.flushes += 1;
        Ok(FlushEvent { leaf: id, count })
    }

    /// Keys inserted = keys buffered + keys written to leaves.
    pub fn conserved(&self) -> bool {
        self.inserted == self.buffer.len() as u64 + self.model.total_resident()
    }
}

/// `(max, p95)` over leaves of `weight * num_leaves`, where a leaf's weight
/// is its probability under `dist`. The percentile uses nearest rank.
pub fn leaf_weight_ratios(model: &BTreeModel, dist: &KeyDistribution) -> (f64, f64) {
    let n = model.num_leaves();
    let mut ratios: Vec<f64> = (0..n)
        .map(|id| {
            let (lo, hi) = model.bounds(id);
            dist.mass(lo, hi) * n as f64
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
    (ratios[n - 1], ratios[rank - 1])
}

/// `max_i (x[i + b] - x[i])` over sorted points.
pub fn max_b_spacing(points: &[f64], b: usize) -> Result<f64> {
    if b >= points.len() {
        return Err(Error::BTooLarge { b, len: points.len() });
    }
    debug_assert!(points.windows(2).all(|w| w[0] <= w[1]));
    Ok(points
        .iter()
        .zip(&points[b..])
        .map(|(a, c)| c - a)
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug)]
pub struct BTreeConfig {
    pub policy: FlushPolicy,
    pub keydist: KeyDistribution,
    pub buffer_capacity: usize,
    pub leaf_capacity: usize,
    pub inserts: u64,
    pub window: u64,
    pub seed: u64,
    /// Inserts before the first reporting window.
    pub warmup: u64,
    /// Fixed number of equal-mass leaves with splitting disabled.
    pub freeze_leaves: Option<usize>,
}

impl BTreeConfig {
    pub fn new(policy: FlushPolicy, keydist: KeyDistribution, seed: u64) -> Self {
        Self {
            policy,
            keydist,
            buffer_capacity: 2500,
            leaf_capacity: 160,
            inserts: 5_000_000,
            window: 50_000,
            seed,
            warmup: 0,
            freeze_leaves: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowRow {
    /// Inserts so far, including warmup.
    pub insertions: u64,
    /// Flushes within this window.
    pub flushes: u64,
    /// Window inserts per window flush; NaN when nothing was flushed.
    pub recycle_rate: f64,
    pub num_leaves: usize,
    pub max_leaf_ratio: f64,
    pub p95_leaf_ratio: f64,
}

/// Runs `warmup + inserts` insertions and reports every `window` inserts
/// after the warmup. Keys and policy draws use separate random streams, so
/// runs that differ only in policy see the same keys.
pub fn run_btree(cfg: &BTreeConfig) -> Result<Vec<WindowRow>> {
    cfg.keydist.validate()?;
    if cfg.window == 0 {
        return Err(Error::InvalidConfig("window must be at least 1".into()));
    }
    let model = match cfg.freeze_leaves {
        Some(n) => BTreeModel::frozen(&cfg.keydist, n)?,
        None => BTreeModel::new(cfg.leaf_capacity)?,
    };
    let mut tree = BufferedTree::new(model, InsertBuffer::new(cfg.buffer_capacity)?, cfg.policy);
    let mut keys = Rng::stream(cfg.seed, 0);
    let mut picks = Rng::stream(cfg.seed, 1);
    for _ in 0..cfg.warmup {
        tree.insert_key(cfg.keydist.sample(&mut keys), &mut picks)?;
    }
    let mut rows = Vec::new();
    let mut done = 0;
    while done < cfg.inserts {
        let len = cfg.window.min(cfg.inserts - done);
        let flushes_before = tree.flushes();
        for _ in 0..len {
            tree.insert_key(cfg.keydist.sample(&mut keys), &mut picks)?;
        }
        done += len;
        let flushes = tree.flushes() - flushes_before;
        let (max_leaf_ratio, p95_leaf_ratio) = leaf_weight_ratios(&tree.model, &cfg.keydist);
        rows.push(WindowRow {
            insertions: tree.inserted(),
            flushes,
            recycle_rate: if flushes == 0 { f64::NAN } else { len as f64 / flushes as f64 },
            num_leaves: tree.model.num_leaves(),
            max_leaf_ratio,
            p95_leaf_ratio,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    const NORMAL: KeyDistribution = KeyDistribution::Normal { mu: 0.0, sigma: 1000.0 };

    fn tree(policy: FlushPolicy, buffer: usize, leaf: usize) -> BufferedTree {
        BufferedTree::new(BTreeModel::new(leaf).unwrap(), InsertBuffer::new(buffer).unwrap(), policy)
    }

    #[test]
    fn distribution_parsing_and_cdfs() {
        assert_eq!("uniform".parse::<KeyDistribution>().unwrap(), KeyDistribution::Uniform { lo: 0.0, hi: 1000.0 });
        assert_eq!("pareto:0.5".parse::<KeyDistribution>().unwrap(), KeyDistribution::Pareto { alpha: 0.5, x_min: 1.0 });
        assert_eq!("normal".parse::<KeyDistribution>().unwrap(), NORMAL);
        assert!("pareto:-1".parse::<KeyDistribution>().is_err());
        assert!("zipf".parse::<KeyDistribution>().is_err());
        for d in ["uniform:2:5", "pareto:2:3", "normal:1:2"] {
            assert_eq!(d.parse::<KeyDistribution>().unwrap().to_string(), d);
        }
        assert!((NORMAL.cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((NORMAL.cdf(1000.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        let p = KeyDistribution::Pareto { alpha: 2.0, x_min: 1.0 };
        assert_eq!(p.cdf(0.5), 0.0);
        assert!((p.cdf(2.0) - 0.75).abs() < 1e-15);
        // Far tail mass stays accurate.
        assert!((p.mass(1e6, 2e6) - 0.75e-12).abs() < 1e-24);
        assert!((NORMAL.mass(8000.0, f64::INFINITY) - 0.5 * libm::erfc(8.0 / 2f64.sqrt())).abs() < 1e-28);
        for d in [NORMAL, p, KeyDistribution::Uniform { lo: 0.0, hi: 1000.0 }] {
            for u in [0.1, 0.5, 0.9] {
                assert!((d.cdf(d.quantile(u)) - u).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn capacity_one_buffer() {
        let mut t = tree(FlushPolicy::FullestBin, 1, 160);
        let mut rng = Rng::new(0);
        assert_eq!(t.insert_key(1.0, &mut rng).unwrap(), None);
        assert_eq!(t.insert_key(2.0, &mut rng).unwrap(), Some(FlushEvent { leaf: 0, count: 1 }));
        assert!(t.conserved());
    }

    #[test]
    fn identical_keys_flush_whole_buffer() {
        let mut t = tree(FlushPolicy::RandomBall, 10, 4);
        let mut rng = Rng::new(0);
        for _ in 0..10 {
            t.insert_key(5.0, &mut rng).unwrap();
        }
        let ev = t.insert_key(5.0, &mut rng).unwrap().unwrap();
        assert_eq!(ev.count, 10);
        // All-identical keys cannot be split.
        assert_eq!(t.model.num_leaves(), 1);
        assert!(t.conserved());
    }

    #[test]
    fn one_group_flushes_its_leaf() {
        for policy in FlushPolicy::ALL {
            let mut t = BufferedTree::new(
                BTreeModel::frozen(&NORMAL, 4).unwrap(),
                InsertBuffer::new(10).unwrap(),
                policy,
            );
            let mut rng = Rng::new(1);
            t.insert_key(1e6, &mut rng).unwrap();
            assert_eq!(t.flush(&mut rng).unwrap(), FlushEvent { leaf: 3, count: 1 });
            assert!(matches!(t.flush(&mut rng), Err(Error::EmptyBuffer)));
        }
    }

    #[test]
    fn random_ball_is_proportional() {
        let model = BTreeModel::frozen(&NORMAL, 2).unwrap();
        let mut rng = Rng::new(7);
        let trials = 100_000;
        let mut first = 0;
        for _ in 0..trials {
            let mut t = BufferedTree::new(model.clone(), InsertBuffer::new(10).unwrap(), FlushPolicy::RandomBall);
            for k in [-1.0, -2.0, -3.0, 1.0] {
                t.insert_key(k, &mut rng).unwrap();
            }
            if t.flush(&mut rng).unwrap().leaf == 0 {
                first += 1;
            }
        }
        let f = first as f64 / trials as f64;
        assert!((f - 0.75).abs() < 0.02, "f = {f}");
    }

    #[test]
    fn golden_gate_takes_successor() {
        let mut t = BufferedTree::new(
            BTreeModel::frozen(&KeyDistribution::Uniform { lo: 0.0, hi: 4.0 }, 4).unwrap(),
            InsertBuffer::new(100).unwrap(),
            FlushPolicy::GoldenGate,
        );
        let mut rng = Rng::new(0);
        for k in [0.5, 0.6, 1.5, 3.5] {
            t.insert_key(k, &mut rng).unwrap();
        }
        let order: Vec<usize> = (0..3).map(|_| t.flush(&mut rng).unwrap().leaf).collect();
        assert_eq!(order, vec![0, 1, 3]);
        t.insert_key(0.1, &mut rng).unwrap();
        t.insert_key(2.5, &mut rng).unwrap();
        // After the last leaf the cursor wraps to the front.
        assert_eq!(t.flush(&mut rng).unwrap().leaf, 0);
        assert_eq!(t.flush(&mut rng).unwrap().leaf, 2);
    }

    #[test]
    fn fullest_bin_takes_largest_group() {
        let mut t = BufferedTree::new(
            BTreeModel::frozen(&KeyDistribution::Uniform { lo: 0.0, hi: 3.0 }, 3).unwrap(),
            InsertBuffer::new(100).unwrap(),
            FlushPolicy::FullestBin,
        );
        let mut rng = Rng::new(0);
        for k in [0.5, 1.5, 1.6, 2.5, 2.6] {
            t.insert_key(k, &mut rng).unwrap();
        }
        // Ties go to the lowest id.
        assert_eq!(t.flush(&mut rng).unwrap(), FlushEvent { leaf: 1, count: 2 });
    }

    #[test]
    fn leaf_ratio_examples() {
        let one = BTreeModel::new(160).unwrap();
        assert_eq!(leaf_weight_ratios(&one, &NORMAL), (1.0, 1.0));
        let two = BTreeModel::frozen(&NORMAL, 2).unwrap();
        let (max, p95) = leaf_weight_ratios(&two, &NORMAL);
        assert!((max - 1.0).abs() < 1e-12 && (p95 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn b_spacing_examples() {
        assert_eq!(max_b_spacing(&[0.0, 0.5, 1.0], 1).unwrap(), 0.5);
        assert_eq!(max_b_spacing(&[0.0, 0.5, 1.0], 2).unwrap(), 1.0);
        assert!(matches!(max_b_spacing(&[0.0, 0.5, 1.0], 3), Err(Error::BTooLarge { b: 3, len: 3 })));
    }

    #[test]
    fn fenwick_find() {
        let mut f = Fenwick::default();
        for (i, v) in [3u64, 0, 2, 5].into_iter().enumerate() {
            f.set(i, v);
        }
        let picks: Vec<usize> = (0..10).map(|r| f.find(r)).collect();
        assert_eq!(picks, vec![0, 0, 0, 2, 2, 3, 3, 3, 3, 3]);
        f.set(40, 1);
        assert_eq!(f.find(10), 40);
        f.set(0, 0);
        assert_eq!(f.find(0), 2);
    }

    #[test]
    fn run_reports_windows() {
        let mut cfg = BTreeConfig::new(FlushPolicy::GoldenGate, NORMAL, 3);
        cfg.inserts = 20_000;
        cfg.window = 5000;
        cfg.buffer_capacity = 500;
        let rows = run_btree(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[3].insertions, 20_000);
        for r in &rows {
            assert!(r.recycle_rate >= 1.0);
            assert!(r.max_leaf_ratio >= r.p95_leaf_ratio);
        }
        assert_eq!(rows, run_btree(&cfg).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn leaves_partition_and_respect_capacity(
            seed in any::<u64>(),
            which in 0usize..3,
            policy in 0usize..3,
            buffer in 1usize..200,
            leaf in 2usize..40,
            inserts in 0usize..3000,
        ) {
            let dist = [NORMAL, KeyDistribution::Pareto { alpha: 0.5, x_min: 1.0 }, KeyDistribution::Uniform { lo: 0.0, hi: 1000.0 }][which];
            let mut t = tree(FlushPolicy::ALL[policy], buffer, leaf);
            let mut keys = Rng::stream(seed, 0);
            let mut rng = Rng::stream(seed, 1);
            for _ in 0..inserts {
                t.insert_key(dist.sample(&mut keys), &mut rng).unwrap();
                prop_assert!(t.buffer.len() <= buffer);
            }
            prop_assert!(t.conserved());
            let ids: Vec<usize> = t.model.ids_in_order().collect();
            prop_assert_eq!(t.model.bounds(ids[0]).0, f64::NEG_INFINITY);
            prop_assert_eq!(t.model.bounds(*ids.last().unwrap()).1, f64::INFINITY);
            for w in ids.windows(2) {
                prop_assert_eq!(t.model.bounds(w[0]).1, t.model.bounds(w[1]).0);
            }
            for &id in &ids {
                prop_assert!(t.model.resident(id) <= leaf as u64);
                for &k in &t.model.leaves[id].keys {
                    prop_assert_eq!(t.model.leaf_for(k), id);
                }
            }
            for (id, g) in t.buffer.groups.iter().enumerate() {
                for &k in g {
                    prop_assert_eq!(t.model.leaf_for(k), id);
                }
            }
        }
    }
}
