//! Monte Carlo experiment drivers: forest convergence to the exact depths,
//! concentration of forest scores, uniform-spacing statistics, and depth
//! estimators for multi-dimensional data.

use std::io::Write;
use std::path::PathBuf;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, sort_and_validate, Dataset, SortedSample1D};
use crate::error::{Error, Result};
use crate::forest::{draw_subsample, fit_forest, tree_stream};
use crate::oracle::{depth_profile, expected_depth_any, expected_depth_at_sample, rank_by_depth};
use crate::rng::{derive_seed, stream};

/// Stream id reserved for synthetic data; forests use derived seeds.
const DATA_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    Normal,
    Uniform,
    Exponential,
    /// One column of a CSV file; `n` is taken from the file.
    Csv { path: PathBuf, column: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: Generator,
    pub n: usize,
    pub psi: usize,
    #[serde(alias = "M_grid")]
    pub m_grid: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: Generator::Uniform,
            n: 100,
            psi: 100,
            m_grid: (1..=10).map(|k| 100 * k).collect(),
            repeats: 10,
            seed: 42,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.m_grid.is_empty() {
            return bad("M grid is empty");
        }
        if self.m_grid[0] == 0 || self.m_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("M grid must be positive and strictly ascending");
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        if self.psi < 2 {
            return bad("psi must be at least 2");
        }
        if !matches!(self.generator, Generator::Csv { .. }) && (self.n < 2 || self.psi > self.n) {
            return bad("need 2 <= psi <= n");
        }
        Ok(())
    }
}

/// Draws (or loads) the experiment's 1-D sample.
pub fn generate_sample(generator: &Generator, n: usize, seed: u64) -> Result<SortedSample1D> {
    let mut rng = stream(seed, DATA_STREAM);
    let values: Vec<f64> = match generator {
        Generator::Uniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        Generator::Exponential => (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect(),
        Generator::Normal => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        Generator::Csv { path, column } => {
            let data = load_csv(path, Some(std::slice::from_ref(column)))?;
            data.column(0)
        }
    };
    sort_and_validate(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub m_trees: usize,
    pub repeat: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseSummary {
    pub m_trees: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// Normal-approximation 95% interval for the mean over repeats.
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub config: ExperimentConfig,
    pub n: usize,
    pub rows: Vec<MseRow>,
    pub summary: Vec<MseSummary>,
}

impl ConvergenceResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["M", "repeat", "mse"])?;
        for r in &self.rows {
            w.write_record([r.m_trees.to_string(), r.repeat.to_string(), r.mse.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            config: &'a ExperimentConfig,
            n: usize,
            summary: &'a [MseSummary],
        }
        Ok(serde_json::to_string_pretty(&Summary { config: &self.config, n: self.n, summary: &self.summary })?)
    }

    pub fn mean_mse(&self) -> Vec<f64> {
        self.summary.iter().map(|s| s.mean).collect()
    }
}

/// Fits one forest per repeat with `max(M_grid)` trees and measures the MSE
/// of every prefix in the grid, so within a repeat the forests are nested.
///
/// The target for each point is the exact expected depth of each tree's own
/// subsample, averaged over the same trees; with `psi = n` this is just the
/// depth profile of the data.
pub fn convergence_experiment(cfg: &ExperimentConfig) -> Result<ConvergenceResult> {
    cfg.validate()?;
    let sample = generate_sample(&cfg.generator, cfg.n, cfg.seed)?;
    let n = sample.len();
    if cfg.psi > n {
        return Err(Error::InvalidConfig(format!("psi = {} exceeds n = {n}", cfg.psi)));
    }
    let data = Dataset::from_column(sample.values())?;
    let max_m = *cfg.m_grid.last().unwrap();
    let full_profile = (cfg.psi >= n).then(|| depth_profile(&sample)).transpose()?;

    let per_repeat: Vec<Vec<MseRow>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|repeat| -> Result<Vec<MseRow>> {
            let seed = derive_seed(cfg.seed, repeat as u64);
            let forest = fit_forest(&data, max_m, cfg.psi, seed)?;
            // depth[m][i], target[m][i]
            let depth: Vec<Vec<f64>> = forest
                .trees()
                .iter()
                .map(|t| data.rows().map(|p| t.depth(p).map(|d| d as f64)).collect())
                .collect::<Result<_>>()?;
            let target: Vec<Vec<f64>> = match &full_profile {
                Some(p) => vec![p.expected_depths.clone(); max_m],
                None => (0..max_m)
                    .map(|m| {
                        let idx = draw_subsample(&mut tree_stream(seed, m), n, cfg.psi);
                        let sub = SortedSample1D::new(idx.iter().map(|&r| sample.values()[r]).collect::<Vec<_>>())?;
                        sample.values().iter().map(|&x| expected_depth_any(&sub, x)).collect()
                    })
                    .collect::<Result<_>>()?,
            };
            let mut depth_sum = vec![0.0; n];
            let mut target_sum = vec![0.0; n];
            let mut rows = Vec::with_capacity(cfg.m_grid.len());
            let mut grid = cfg.m_grid.iter().peekable();
            for m in 0..max_m {
                for i in 0..n {
                    depth_sum[i] += depth[m][i];
                    target_sum[i] += target[m][i];
                }
                if grid.peek() == Some(&&(m + 1)) {
                    grid.next();
                    let k = (m + 1) as f64;
                    let mse = (0..n).map(|i| (depth_sum[i] / k - target_sum[i] / k).powi(2)).sum::<f64>() / n as f64;
                    rows.push(MseRow { m_trees: m + 1, repeat, mse });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    let summary = cfg
        .m_grid
        .iter()
        .enumerate()
        .map(|(g, &m_trees)| {
            let v: Vec<f64> = per_repeat.iter().map(|rows| rows[g].mse).collect();
            let r = v.len() as f64;
            let mean = v.iter().sum::<f64>() / r;
            let std_dev = if v.len() > 1 {
                (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0)).sqrt()
            } else {
                0.0
            };
            let half = 1.96 * std_dev / r.sqrt();
            MseSummary { m_trees, mean, std_dev, lower: (mean - half).max(0.0), upper: mean + half }
        })
        .collect();

    // rows ordered by (M, repeat)
    let mut rows: Vec<MseRow> = per_repeat.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.m_trees, r.repeat));
    Ok(ConvergenceResult { config: cfg.clone(), n, rows, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub index: usize,
    pub epsilon: f64,
    pub m_trees: usize,
    pub trials: usize,
    pub oracle_depth: f64,
    pub violations: usize,
    pub empirical_freq: f64,
    pub hoeffding_bound: f64,
}

/// Concentration of the forest score at the first (boundary) point.
pub fn concentration_check(s: &SortedSample1D, epsilon: f64, m_trees: usize, trials: usize, seed: u64) -> Result<ConcentrationResult> {
    concentration_check_at(s, 1, epsilon, m_trees, trials, seed)
}

/// Fraction of `trials` forests (`psi = n`, `m_trees` trees each) whose score
/// at the 1-based point `index` misses the exact depth by at least `epsilon`,
/// next to the bound `2 exp(-2 eps^2 M / n^2)`.
pub fn concentration_check_at(
    s: &SortedSample1D,
    index: usize,
    epsilon: f64,
    m_trees: usize,
    trials: usize,
    seed: u64,
) -> Result<ConcentrationResult> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
    }
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let oracle_depth = expected_depth_at_sample(s, index)?;
    let n = s.len();
    let data = Dataset::from_column(s.values())?;
    let point = [s.values()[index - 1]];
    let violations = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<usize> {
            let forest = fit_forest(&data, m_trees, n, derive_seed(seed, t as u64))?;
            let score = forest.score_prefix(&point, m_trees)?;
            Ok(usize::from((score - oracle_depth).abs() >= epsilon))
        })
        .sum::<Result<usize>>()?;
    let hoeffding_bound = 2.0 * (-2.0 * epsilon * epsilon * m_trees as f64 / (n * n) as f64).exp();
    Ok(ConcentrationResult {
        index,
        epsilon,
        m_trees,
        trials,
        oracle_depth,
        violations,
        empirical_freq: violations as f64 / trials as f64,
        hoeffding_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStatistics {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub mean_min_gap: f64,
    /// `1 / (n^2 - 1)`.
    pub expected: f64,
    pub relative_error: f64,
    /// `(q, kappa quantile)` pairs.
    pub kappa_quantiles: Vec<(f64, f64)>,
    pub frac_kappa_ge_half_sqrt_n: f64,
}

const KAPPA_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics of the adjacent gaps of `n` uniform points on `[0, 1]`, over
/// `trials` independent samples.
pub fn uniform_gap_statistics(n: usize, trials: usize, seed: u64) -> Result<GapStatistics> {
    if n < 4 {
        return Err(Error::NotEnoughPoints { needed: 4, got: n });
    }
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let per_trial: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, t as u64);
            let mut x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            x.sort_by(f64::total_cmp);
            let (lo, hi) = x.windows(2).map(|w| w[1] - w[0]).fold((f64::INFINITY, 0.0f64), |(lo, hi), g| (lo.min(g), hi.max(g)));
            (lo, hi / lo)
        })
        .collect();
    let mean_min_gap = per_trial.iter().map(|p| p.0).sum::<f64>() / trials as f64;
    let expected = 1.0 / ((n * n) as f64 - 1.0);
    let mut kappas: Vec<f64> = per_trial.iter().map(|p| p.1).collect();
    kappas.sort_by(f64::total_cmp);
    let half_sqrt_n = (n as f64).sqrt() / 2.0;
    Ok(GapStatistics {
        n,
        trials,
        seed,
        mean_min_gap,
        expected,
        relative_error: (mean_min_gap - expected).abs() / expected,
        kappa_quantiles: KAPPA_LEVELS.iter().map(|&q| (q, quantile(&kappas, q))).collect(),
        frac_kappa_ge_half_sqrt_n: kappas.iter().filter(|&&k| k >= half_sqrt_n).count() as f64 / trials as f64,
    })
}

/// Scalar feature maps for multi-dimensional data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mapping {
    /// Coordinate `j` (0-based).
    Coordinate { j: usize },
    L1ToCentroid,
    /// `exp(-gamma ||x - reference||^2)`.
    Rbf { reference: Vec<f64>, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DepthMode {
    AverageProjection,
    Mapped { mapping: Mapping },
}

fn check_point(data: &Dataset, point: &[f64]) -> Result<()> {
    if point.len() != data.d() {
        return Err(Error::DimensionMismatch { expected: data.d(), got: point.len() });
    }
    Ok(())
}

impl Mapping {
    fn feature(&self, x: &[f64], centroid: &[f64]) -> f64 {
        match self {
            Mapping::Coordinate { j } => x[*j],
            Mapping::L1ToCentroid => x.iter().zip(centroid).map(|(a, b)| (a - b).abs()).sum(),
            Mapping::Rbf { reference, gamma } => {
                (-gamma * x.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum::<f64>()).exp()
            }
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Mapping::Coordinate { j } if *j >= d => Err(Error::IndexOutOfBounds { index: *j, len: d }),
            Mapping::Rbf { reference, .. } if reference.len() != d => {
                Err(Error::DimensionMismatch { expected: d, got: reference.len() })
            }
            Mapping::Rbf { gamma, .. } if !(*gamma > 0.0) => Err(Error::InvalidParams("RBF gamma must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Exact expected depth of `point` for multi-dimensional data, either as the
/// mean of the per-column 1-D depths or as the 1-D depth of a scalar feature.
/// Every column (or the mapped values) must be free of repeated values.
pub fn estimate_depth_multidim(data: &Dataset, point: &[f64], mode: &DepthMode) -> Result<f64> {
    check_point(data, point)?;
    match mode {
        DepthMode::AverageProjection => {
            if data.d() < 2 {
                return Err(Error::InvalidParams("average projection needs at least two columns".into()));
            }
            let mut total = 0.0;
            for j in 0..data.d() {
                total += expected_depth_any(&sort_and_validate(data.column(j))?, point[j])?;
            }
            Ok(total / data.d() as f64)
        }
        DepthMode::Mapped { mapping } => {
            mapping.validate(data.d())?;
            let centroid: Vec<f64> =
                (0..data.d()).map(|j| data.column(j).iter().sum::<f64>() / data.n() as f64).collect();
            let mapped: Vec<f64> = data.rows().map(|r| mapping.feature(r, &centroid)).collect();
            expected_depth_any(&sort_and_validate(mapped)?, mapping.feature(point, &centroid))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub index: usize,
    pub x: f64,
    pub oracle_depth: f64,
    pub forest_depth: f64,
    pub anomaly: bool,
}

pub const PROFILE_TREES: usize = 1000;

/// Exact and forest depths (`psi = n`, 1000 trees) side by side, flagging the
/// `m_anomalies` shallowest points by exact depth.
pub fn depth_profile_experiment(s: &SortedSample1D, m_anomalies: usize, seed: u64) -> Result<Vec<ProfileRow>> {
    let profile = depth_profile(s)?;
    let flagged = rank_by_depth(&profile, m_anomalies)?;
    let data = Dataset::from_column(s.values())?;
    let forest = fit_forest(&data, PROFILE_TREES, s.len(), seed)?;
    let scores = forest.score_dataset(&data)?;
    Ok((0..s.len())
        .map(|r| ProfileRow {
            index: r + 1,
            x: s.values()[r],
            oracle_depth: profile.expected_depths[r],
            forest_depth: scores[r],
            anomaly: flagged.contains(&(r + 1)),
        })
        .collect())
}

pub fn write_profile_csv<W: Write>(out: W, rows: &[ProfileRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "x", "oracle_depth", "forest_depth", "anomaly"])?;
    for r in rows {
        w.write_record([
            r.index.to_string(),
            r.x.to_string(),
            r.oracle_depth.to_string(),
            r.forest_depth.to_string(),
            r.anomaly.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
