//! Matrix-free transition operator.
//!
//! Rethrowing `k` balls is the same as throwing one ball `k` times, so every
//! transition factors through configurations with fewer balls. Level `j`
//! holds the compositions of `j` into `n` parts; one throw maps level `j` to
//! level `j + 1`. Vectors over a level carry `s` internal states per
//! configuration, indexed `id * s + c`.

use super::space::{compositions, Ranker};
use crate::distribution::ProbabilityDistribution;
use crate::par::{self, Execution};

const NONE: u32 = u32::MAX;

#[derive(Debug)]
struct Level {
    len: usize,
    /// `up[id * n + i]`: id of `x + e_i` in the next level.
    up: Vec<u32>,
    /// `down[id * n + i]`: id of `x - e_i` in the previous level, or `NONE`.
    down: Vec<u32>,
}

#[derive(Debug)]
pub(crate) struct Kernel {
    n: usize,
    p: Vec<f64>,
    levels: Vec<Level>,
    ranker: Ranker,
    exec: Execution,
}

impl Kernel {
    /// Caller checks that `C(m + n, n)` configurations fit in memory.
    pub fn new(m: u64, dist: &ProbabilityDistribution, exec: Execution) -> Self {
        let n = dist.n();
        let ranker = Ranker::new(m, n);
        let mut levels = Vec::with_capacity(m as usize + 1);
        for j in 0..=m {
            let comps = compositions(j, n);
            let len = comps.len() / n;
            let mut up = Vec::new();
            let mut down = Vec::new();
            let mut y = vec![0u64; n];
            if j < m {
                up.reserve(len * n);
                for x in comps.chunks_exact(n) {
                    for i in 0..n {
                        y.copy_from_slice(x);
                        y[i] += 1;
                        up.push(ranker.rank(&y) as u32);
                    }
                }
            }
            if j > 0 {
                down.reserve(len * n);
                for x in comps.chunks_exact(n) {
                    for i in 0..n {
                        if x[i] == 0 {
                            down.push(NONE);
                        } else {
                            y.copy_from_slice(x);
                            y[i] -= 1;
                            down.push(ranker.rank(&y) as u32);
                        }
                    }
                }
            }
            levels.push(Level { len, up, down });
        }
        Self {
            n,
            p: dist.weights().to_vec(),
            levels,
            ranker,
            exec,
        }
    }

    pub fn m(&self) -> usize {
        self.levels.len() - 1
    }

    /// Id of `x` within its own level.
    pub fn rank(&self, x: &[u64]) -> usize {
        self.ranker.rank(x)
    }

    /// Distribution over level `j + 1` after one more ball is thrown.
    pub fn throw_forward(&self, j: usize, v: &[f64], s: usize) -> Vec<f64> {
        let next = &self.levels[j + 1];
        let mut out = vec![0.0; next.len * s];
        let (n, p) = (self.n, &self.p);
        par::fill_chunks(self.exec, &mut out, s, |id, chunk| {
            for (i, &pi) in p.iter().enumerate() {
                let src = next.down[id * n + i];
                if src == NONE || pi == 0.0 {
                    continue;
                }
                let src = &v[src as usize * s..(src as usize + 1) * s];
                for (o, x) in chunk.iter_mut().zip(src) {
                    *o += pi * x;
                }
            }
        });
        out
    }

    /// Expectation of `h` (over level `j + 1`) after one more ball is thrown
    /// from each configuration of level `j`.
    pub fn throw_backward(&self, j: usize, h: &[f64], s: usize) -> Vec<f64> {
        let cur = &self.levels[j];
        let mut out = vec![0.0; cur.len * s];
        let (n, p) = (self.n, &self.p);
        par::fill_chunks(self.exec, &mut out, s, |id, chunk| {
            for (i, &pi) in p.iter().enumerate() {
                if pi == 0.0 {
                    continue;
                }
                let dst = cur.up[id * n + i] as usize;
                for (o, x) in chunk.iter_mut().zip(&h[dst * s..(dst + 1) * s]) {
                    *o += pi * x;
                }
            }
        });
        out
    }

    /// Pushes mass deposited at lower levels up to level `m`. `deposits[j]`
    /// is the mass whose remaining `m - j` balls are still to be thrown.
    pub fn forward(&self, mut deposits: Vec<Vec<f64>>, s: usize) -> Vec<f64> {
        let m = self.m();
        debug_assert_eq!(deposits.len(), m + 1);
        let mut v = std::mem::take(&mut deposits[0]);
        for j in 0..m {
            let mut next = self.throw_forward(j, &v, s);
            for (a, b) in next.iter_mut().zip(&deposits[j + 1]) {
                *a += b;
            }
            v = next;
        }
        v
    }

    /// `out[j]` = expected `h` at level `m` after throwing the remaining
    /// `m - j` balls from each configuration of level `j`.
    pub fn backward(&self, h: &[f64], s: usize) -> Vec<Vec<f64>> {
        let m = self.m();
        let mut out = vec![Vec::new(); m + 1];
        out[m] = h.to_vec();
        for j in (0..m).rev() {
            out[j] = self.throw_backward(j, &out[j + 1], s);
        }
        out
    }

    pub fn empty_deposits(&self, s: usize) -> Vec<Vec<f64>> {
        self.levels.iter().map(|l| vec![0.0; l.len * s]).collect()
    }
}
