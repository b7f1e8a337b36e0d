//! Isolation of one target point as an absorbing random walk.
//!
//! While a tree grows, the node holding `x_i` covers some contiguous run
//! `x_l ..= x_r` with `l <= i <= r`. Each split either moves `l` right or `r`
//! left, with probability proportional to the gap the split lands in, until
//! the node is `(i, i)`. The number of steps is the depth of `x_i`.

use rand::Rng;
use serde::Serialize;

use crate::data::SortedSample1D;
use crate::error::{Error, Result};
use crate::oracle::compensated_sum;
use crate::rng::Stream;

/// Dense transition matrix over the states `(l, r)`, `l <= i <= r`, ordered
/// lexicographically. State pairs are 1-based point indices.
#[derive(Debug, Clone, Serialize)]
pub struct WalkChain {
    pub sample: SortedSample1D,
    pub target: usize,
    pub states: Vec<(usize, usize)>,
    pub matrix: Vec<Vec<f64>>,
    pub initial: usize,
    pub absorbing: usize,
}

impl WalkChain {
    fn width(&self) -> usize {
        self.sample.len() - self.target + 1
    }

    /// Position of state `(l, r)` in [`WalkChain::states`].
    pub fn state_index(&self, l: usize, r: usize) -> Option<usize> {
        let (i, n) = (self.target, self.sample.len());
        if l == 0 || l > i || r < i || r > n {
            return None;
        }
        Some((l - 1) * self.width() + (r - i))
    }

    /// Transition probability between two states given as `(l, r)` pairs.
    pub fn probability(&self, from: (usize, usize), to: (usize, usize)) -> f64 {
        match (self.state_index(from.0, from.1), self.state_index(to.0, to.1)) {
            (Some(a), Some(b)) => self.matrix[a][b],
            _ => 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn build_chain(s: &SortedSample1D, i: usize) -> Result<WalkChain> {
    let n = s.len();
    if n < 2 {
        return Err(Error::NotEnoughPoints { needed: 2, got: n });
    }
    if i == 0 || i > n {
        return Err(Error::IndexOutOfBounds { index: i, len: n });
    }
    let x = |k: usize| s.values()[k - 1];
    let width = n - i + 1;
    let states: Vec<(usize, usize)> = (1..=i).flat_map(|l| (i..=n).map(move |r| (l, r))).collect();
    let size = states.len();
    let at = |l: usize, r: usize| (l - 1) * width + (r - i);

    let mut matrix = vec![vec![0.0; size]; size];
    for &(l, r) in &states {
        let row = &mut matrix[at(l, r)];
        if l == r {
            row[at(l, r)] = 1.0;
            continue;
        }
        let span = x(r) - x(l);
        // split in (x_{l'-1}, x_{l'}) keeps x_{l'} ..= x_r
        for lp in l + 1..=i {
            row[at(lp, r)] = (x(lp) - x(lp - 1)) / span;
        }
        // split in (x_{r'}, x_{r'+1}) keeps x_l ..= x_{r'}
        for rp in i..r {
            row[at(l, rp)] = (x(rp + 1) - x(rp)) / span;
        }
    }
    Ok(WalkChain {
        sample: s.clone(),
        target: i,
        states,
        matrix,
        initial: at(1, n),
        absorbing: at(i, i),
    })
}

/// Row vector `e_initial * P^xi`.
fn distribution_after(chain: &WalkChain, xi: usize) -> Vec<f64> {
    let size = chain.states.len();
    let mut v = vec![0.0; size];
    v[chain.initial] = 1.0;
    for _ in 0..xi {
        v = step(chain, &v);
    }
    v
}

fn step(chain: &WalkChain, v: &[f64]) -> Vec<f64> {
    let mut next = vec![0.0; v.len()];
    for (a, &mass) in v.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        for (b, &p) in chain.matrix[a].iter().enumerate() {
            next[b] += mass * p;
        }
    }
    next
}

/// `Pr[depth <= xi]`, the `(initial, absorbing)` entry of `P^xi`.
pub fn absorption_cdf(chain: &WalkChain, xi: usize) -> f64 {
    distribution_after(chain, xi)[chain.absorbing]
}

/// `Pr[depth <= xi]` for `xi = 0 ..= n - 1`. The last entry is 1 up to
/// rounding: every step shrinks `r - l` by at least one.
pub fn absorption_cdf_series(chain: &WalkChain) -> Vec<f64> {
    let horizon = chain.sample.len() - 1;
    let mut v = vec![0.0; chain.states.len()];
    v[chain.initial] = 1.0;
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(v[chain.absorbing]);
    for _ in 0..horizon {
        v = step(chain, &v);
        out.push(v[chain.absorbing]);
    }
    out
}

/// Expected number of steps to absorption, `sum_{xi >= 0} (1 - Pr[depth <= xi])`.
pub fn expected_steps(chain: &WalkChain) -> f64 {
    let cdf = absorption_cdf_series(chain);
    compensated_sum(cdf[..cdf.len() - 1].iter().map(|c| 1.0 - c))
}

/// One sampled trajectory from `(1, n)` to `(i, i)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub states: Vec<(usize, usize)>,
    pub steps: usize,
}

pub fn simulate_walk(s: &SortedSample1D, i: usize, rng: &mut Stream) -> Result<Trajectory> {
    let n = s.len();
    if n < 2 {
        return Err(Error::NotEnoughPoints { needed: 2, got: n });
    }
    if i == 0 || i > n {
        return Err(Error::IndexOutOfBounds { index: i, len: n });
    }
    let v = s.values();
    let (mut l, mut r) = (1usize, n);
    let mut states = vec![(l, r)];
    while (l, r) != (i, i) {
        let u = rng.random_range(v[l - 1]..v[r - 1]);
        // the split falls in gap (x_k, x_{k+1}) with l <= k < r
        let k = l - 1 + v[l - 1..r].partition_point(|&p| p <= u);
        let k = k.clamp(l, r - 1);
        if k < i {
            l = k + 1;
        } else {
            r = k;
        }
        states.push((l, r));
    }
    let steps = states.len() - 1;
    Ok(Trajectory { states, steps })
}
