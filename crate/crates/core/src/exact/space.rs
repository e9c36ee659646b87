use std::collections::HashMap;
use std::fmt::Write as _;

use crate::distribution::ProbabilityDistribution;
use crate::{Error, Result};

/// `C(m+n-1, n-1)`, saturating at `u128::MAX`.
pub fn state_count(m: u64, n: usize) -> u128 {
    if n == 0 {
        return 0;
    }
    binomial(m as u128 + n as u128 - 1, n as u128 - 1)
}

pub(crate) fn binomial(a: u128, b: u128) -> u128 {
    if b > a {
        return 0;
    }
    let b = b.min(a - b);
    let mut acc: u128 = 1;
    for i in 0..b {
        // acc * (a - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul(a - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Ranks compositions of any total `r <= m` into `n` parts within their own
/// total, in descending lexicographic order (bin 0 fullest first).
#[derive(Clone, Debug)]
pub(crate) struct Ranker {
    m: usize,
    n: usize,
    /// `table[(k - 1) * (m + 1) + r] = C(r + k, r)` for `1 <= k < n`.
    table: Vec<u64>,
}

impl Ranker {
    pub fn new(m: u64, n: usize) -> Self {
        let m = m as usize;
        let rows = n.saturating_sub(1);
        let mut table = vec![0u64; rows * (m + 1)];
        for k in 1..=rows {
            let row = (k - 1) * (m + 1);
            table[row] = 1;
            for r in 1..=m {
                let above = if k == 1 { 1 } else { table[row - (m + 1) + r] };
                table[row + r] = above.saturating_add(table[row + r - 1]);
            }
        }
        Self { m, n, table }
    }

    #[inline]
    fn c(&self, k: usize, r: usize) -> u64 {
        self.table[(k - 1) * (self.m + 1) + r]
    }

    #[inline]
    pub fn rank(&self, x: &[u64]) -> usize {
        debug_assert_eq!(x.len(), self.n);
        if self.n == 1 {
            return 0;
        }
        let total = x.iter().sum::<u64>() as usize;
        let mut r = total;
        let mut id = 0u64;
        for (i, &xi) in x[..self.n - 1].iter().enumerate() {
            let k = self.n - 1 - i;
            let xi = xi as usize;
            id += self.c(k, r) - self.c(k, r - xi);
            r -= xi;
        }
        // `id` is the ascending rank; flip it.
        (self.c(self.n - 1, total) - 1 - id) as usize
    }
}

/// All compositions of `total` into `n` parts, lexicographically descending,
/// flattened row by row.
pub(crate) fn compositions(total: u64, n: usize) -> Vec<u64> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; n];
    fn rec(pos: usize, left: u64, cur: &mut [u64], out: &mut Vec<u64>) {
        if pos + 1 == cur.len() {
            cur[pos] = left;
            out.extend_from_slice(cur);
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v;
            rec(pos + 1, left - v, cur, out);
        }
    }
    if n > 0 {
        rec(0, total, &mut cur, &mut out);
    }
    out
}

/// Every configuration of `m` balls in `n` bins, in descending lexicographic
/// order.
#[derive(Clone, Debug)]
pub struct StateSpace {
    m: u64,
    n: usize,
    data: Vec<u64>,
    ranker: Ranker,
}

impl StateSpace {
    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn state(&self, id: usize) -> &[u64] {
        &self.data[id * self.n..(id + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn index_of(&self, x: &[u64]) -> Option<usize> {
        (x.len() == self.n && x.iter().sum::<u64>() == self.m).then(|| self.ranker.rank(x))
    }

    pub(crate) fn ranker(&self) -> &Ranker {
        &self.ranker
    }

    /// Space-separated counts, e.g. `"1 0 2"`.
    pub fn label(&self, id: usize) -> String {
        let mut s = String::new();
        for (i, x) in self.state(id).iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x}");
        }
        s
    }
}

pub fn enumerate_states(m: u64, n: usize, state_cap: usize) -> Result<StateSpace> {
    if n == 0 {
        return Err(Error::InvalidBinCount { n, min: 1 });
    }
    let states = state_count(m, n);
    if states > state_cap as u128 {
        return Err(Error::StateSpaceTooLarge { states, cap: state_cap });
    }
    Ok(StateSpace {
        m,
        n,
        data: compositions(m, n),
        ranker: Ranker::new(m, n),
    })
}

/// Outcomes of rethrowing `k` balls, memoized per `k`: each composition of
/// `k` into `n` parts with its multinomial probability. Zero-probability
/// outcomes are dropped.
#[derive(Debug)]
pub struct Rethrows<'a> {
    dist: &'a ProbabilityDistribution,
    memo: HashMap<u64, Vec<(Vec<u64>, f64)>>,
}

impl<'a> Rethrows<'a> {
    pub fn new(dist: &'a ProbabilityDistribution) -> Self {
        Self {
            dist,
            memo: HashMap::new(),
        }
    }

    pub fn outcomes(&mut self, k: u64) -> &[(Vec<u64>, f64)] {
        let dist = self.dist;
        self.memo.entry(k).or_insert_with(|| {
            let n = dist.n();
            compositions(k, n)
                .chunks_exact(n)
                .filter_map(|c| {
                    let prob = multinomial_pmf(c, dist.weights());
                    (prob > 0.0).then(|| (c.to_vec(), prob))
                })
                .collect()
        })
    }
}

fn multinomial_pmf(c: &[u64], p: &[f64]) -> f64 {
    // k! / prod c_i! built as a product of binomials, times prod p_i^c_i.
    let mut left: u64 = c.iter().sum();
    let mut prob = 1.0;
    for (&ci, &pi) in c.iter().zip(p) {
        if ci == 0 {
            continue;
        }
        if pi == 0.0 {
            return 0.0;
        }
        let mut b = 1.0;
        for t in 0..ci {
            b = b * (left - t) as f64 / (t + 1) as f64;
        }
        prob *= b * pi.powi(ci as i32);
        left -= ci;
    }
    prob
}

/// Successor distribution of `state` when bin `bin` is recycled: the bin is
/// emptied and its balls rethrown. Sorted by successor id.
pub fn transition_row(
    space: &StateSpace,
    state: usize,
    bin: usize,
    rethrows: &mut Rethrows<'_>,
) -> Result<Vec<(usize, f64)>> {
    let x = space.state(state);
    let k = *x
        .get(bin)
        .ok_or_else(|| Error::InvalidConfig(format!("bin {bin} out of range")))?;
    if k == 0 {
        return Err(Error::EmptyBinPicked { bin });
    }
    Ok(row_from_outcomes(space, x, bin, rethrows.outcomes(k)))
}

pub(crate) fn row_from_outcomes(
    space: &StateSpace,
    x: &[u64],
    bin: usize,
    outcomes: &[(Vec<u64>, f64)],
) -> Vec<(usize, f64)> {
    let mut base = x.to_vec();
    base[bin] = 0;
    let mut y = base.clone();
    let mut row: Vec<(usize, f64)> = outcomes
        .iter()
        .map(|(c, prob)| {
            for i in 0..y.len() {
                y[i] = base[i] + c[i];
            }
            (space.ranker().rank(&y), *prob)
        })
        .collect();
    row.sort_unstable_by_key(|e| e.0);
    row
}
