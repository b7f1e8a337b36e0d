//! Brute-force k-nearest-neighbour outlier scores under the L1 norm.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    /// Drop the query itself from its candidate neighbours.
    pub exclude_self: bool,
}

impl KnnConfig {
    pub fn new(k: usize) -> Self {
        Self { k, exclude_self: true }
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Mean L1 distance from `point` to its `k` nearest rows, skipping row `skip`.
fn mean_knn_distance(data: &Dataset, point: &[f64], k: usize, skip: Option<usize>) -> Result<f64> {
    let available = data.n() - usize::from(skip.is_some());
    if k == 0 || k > available {
        return Err(Error::KTooLarge { k, available });
    }
    let mut dist: Vec<(f64, usize)> = data
        .rows()
        .enumerate()
        .filter(|&(r, _)| Some(r) != skip)
        .map(|(r, row)| (l1(point, row), r))
        .collect();
    // ties at the k-th distance go to the smaller row index
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dist.len() {
        dist.select_nth_unstable_by(k - 1, cmp);
    }
    let mut nearest = dist[..k].to_vec();
    nearest.sort_by(cmp);
    Ok(nearest.iter().map(|d| d.0).sum::<f64>() / k as f64)
}

/// Score of an arbitrary query. With `exclude_self`, the first row equal to
/// `point` is not a candidate neighbour.
pub fn knn_score(data: &Dataset, point: &[f64], cfg: &KnnConfig) -> Result<f64> {
    if point.len() != data.d() {
        return Err(Error::DimensionMismatch { expected: data.d(), got: point.len() });
    }
    let skip = if cfg.exclude_self { data.rows().position(|row| row == point) } else { None };
    mean_knn_distance(data, point, cfg.k, skip)
}

/// Scores of every row against the rest of the data (the row itself is
/// excluded by index when `exclude_self` is set).
pub fn knn_scores(data: &Dataset, cfg: &KnnConfig) -> Result<Vec<f64>> {
    (0..data.n())
        .into_par_iter()
        .map(|r| mean_knn_distance(data, data.row(r), cfg.k, cfg.exclude_self.then_some(r)))
        .collect()
}

/// 1-based row indices of the `m` largest scores, largest first; ties go to
/// the smaller index.
pub fn rank_by_knn(data: &Dataset, cfg: &KnnConfig, m: usize) -> Result<Vec<usize>> {
    let scores = knn_scores(data, cfg)?;
    rank_scores_descending(&scores, m)
}

pub(crate) fn rank_scores_descending(scores: &[f64], m: usize) -> Result<Vec<usize>> {
    if m == 0 || m > scores.len() {
        return Err(Error::IndexOutOfBounds { index: m, len: scores.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order[..m].iter().map(|k| k + 1).collect())
}

/// Writes `index,<columns...>,score,rank` (1-based index and rank).
pub fn write_scores_csv<W: Write>(out: W, data: &Dataset, scores: &[f64]) -> Result<()> {
    let ranks = {
        let order = rank_scores_descending(scores, scores.len())?;
        let mut ranks = vec![0usize; scores.len()];
        for (pos, idx) in order.iter().enumerate() {
            ranks[idx - 1] = pos + 1;
        }
        ranks
    };
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["index".to_string()];
    header.extend(data.column_names().iter().cloned());
    header.extend(["score".to_string(), "rank".to_string()]);
    w.write_record(&header)?;
    for (r, row) in data.rows().enumerate() {
        let mut rec = vec![(r + 1).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        rec.push(scores[r].to_string());
        rec.push(ranks[r].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
