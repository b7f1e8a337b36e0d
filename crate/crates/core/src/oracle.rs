//! Exact expected isolation depth on 1-D data.
//!
//! For a sorted sample `x_1 < ... < x_n` the expected depth of `x_i` over the
//! tree-growing randomness is
//!
//! ```text
//!   sum_{j=2}^{i}   (x_j - x_{j-1}) / (x_i - x_{j-1})
//! + sum_{j=i+1}^{n} (x_j - x_{j-1}) / (x_j - x_i)
//! ```
//!
//! and between sample points the expected depth interpolates linearly, with
//! constant extrapolation outside `[x_1, x_n]`. Everything here depends only
//! on gap ratios, so it is invariant under `x -> a x + b` with `a > 0`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::SortedSample1D;
use crate::error::{Error, Result};

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for t in terms {
        let next = sum + t;
        if sum.abs() >= t.abs() {
            carry += (sum - next) + t;
        } else {
            carry += (t - next) + sum;
        }
        sum = next;
    }
    sum + carry
}

fn require_two(s: &SortedSample1D) -> Result<()> {
    if s.len() < 2 {
        return Err(Error::NotEnoughPoints { needed: 2, got: s.len() });
    }
    Ok(())
}

/// Expected depth of the 1-based point `i` of `s`.
pub fn expected_depth_at_sample(s: &SortedSample1D, i: usize) -> Result<f64> {
    require_two(s)?;
    let n = s.len();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfBounds { index: i, len: n });
    }
    Ok(depth_unchecked(s.values(), i - 1))
}

// `t` is 0-based here
fn depth_unchecked(x: &[f64], t: usize) -> f64 {
    let xt = x[t];
    let left = (1..=t).map(|j| (x[j] - x[j - 1]) / (xt - x[j - 1]));
    let right = (t + 1..x.len()).map(|j| (x[j] - x[j - 1]) / (x[j] - xt));
    compensated_sum(left.chain(right))
}

/// Expected depth of an arbitrary query `x` against the sample.
pub fn expected_depth_any(s: &SortedSample1D, x: f64) -> Result<f64> {
    require_two(s)?;
    if !x.is_finite() {
        return Err(Error::NonFiniteValue { position: 0, value: x });
    }
    let v = s.values();
    let n = v.len();
    if x < v[0] {
        return Ok(depth_unchecked(v, 0));
    }
    if x >= v[n - 1] {
        return Ok(depth_unchecked(v, n - 1));
    }
    // last t with v[t] <= x
    let t = v.partition_point(|&p| p <= x) - 1;
    let lo = depth_unchecked(v, t);
    if x == v[t] {
        return Ok(lo);
    }
    let hi = depth_unchecked(v, t + 1);
    Ok(lo + (x - v[t]) / (v[t + 1] - v[t]) * (hi - lo))
}

/// Expected depths of every sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthProfile {
    pub sample: SortedSample1D,
    pub expected_depths: Vec<f64>,
}

impl DepthProfile {
    /// Writes `index,x,expected_depth` rows (1-based index).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "x", "expected_depth"])?;
        for (k, (x, h)) in self.sample.values().iter().zip(&self.expected_depths).enumerate() {
            w.write_record([(k + 1).to_string(), x.to_string(), h.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

pub fn depth_profile(s: &SortedSample1D) -> Result<DepthProfile> {
    require_two(s)?;
    let expected_depths = (0..s.len()).map(|t| depth_unchecked(s.values(), t)).collect();
    Ok(DepthProfile { sample: s.clone(), expected_depths })
}

/// 1-based indices of the `m` smallest expected depths, shallowest first;
/// ties go to the smaller index.
pub fn rank_by_depth(profile: &DepthProfile, m: usize) -> Result<Vec<usize>> {
    let n = profile.expected_depths.len();
    if m == 0 || m > n {
        return Err(Error::IndexOutOfBounds { index: m, len: n });
    }
    Ok(smallest_indices(&profile.expected_depths, m))
}

pub(crate) fn smallest_indices(values: &[f64], m: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order.truncate(m);
    order.into_iter().map(|k| k + 1).collect()
}
