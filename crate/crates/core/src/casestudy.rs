//! Density assumption checks, detection-threshold predictors for the three
//! 1-D anomaly archetypes, and constructors for the datasets they are
//! exercised on.
//!
//! Predictors compare an observed anomaly gap `theta` against a threshold.
//! The marginal-single thresholds are exact expressions; the central and
//! clustered ones are only known up to a constant, which is supplied through
//! [`Calibration`] (shipped defaults live in [`crate::calibration`]).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::calibration;
use crate::data::{full_density_metrics, sort_and_validate, Dataset, DensityMetrics, SortedSample1D};
use crate::error::{Error, Result};
use crate::knn::{knn_scores, KnnConfig};
use crate::oracle::depth_profile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyType {
    MarginalSingle,
    CentralSingle,
    MarginalClustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Iforest,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Detected,
    NotDetected,
    /// Below a sufficient-only threshold: failures exist but are not certain.
    NotGuaranteed,
}

/// Where the constant in front of an order-of-magnitude threshold comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Calibration {
    /// Shipped default for the predictor (exact bound for central k-NN).
    Default,
    Constant(f64),
    /// Central k-NN only: `(k+1)/2 U - (k/2-1)/2 L`, with odd `k` rounded up.
    ExactBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    pub metrics: DensityMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n0: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub anomaly_type: AnomalyType,
    pub detector: Detector,
    pub observed_gap: f64,
    pub threshold: f64,
    /// `observed_gap > threshold`.
    pub decision: bool,
    pub verdict: Verdict,
    pub inputs: ReportInputs,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ThresholdReport {
    fn new(
        anomaly_type: AnomalyType,
        detector: Detector,
        observed_gap: f64,
        threshold: f64,
        sufficient_only: bool,
        inputs: ReportInputs,
    ) -> Self {
        let decision = observed_gap > threshold;
        let verdict = match (decision, sufficient_only) {
            (true, _) => Verdict::Detected,
            (false, true) => Verdict::NotGuaranteed,
            (false, false) => Verdict::NotDetected,
        };
        Self { anomaly_type, detector, observed_gap, threshold, decision, verdict, inputs, warnings: Vec::new() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn inputs(metrics: &DensityMetrics) -> ReportInputs {
    ReportInputs { metrics: *metrics, n0: None, n1: None, k: None, constant: None }
}

/// Marginal single anomaly under iForest: detected whenever
/// `gap > U * kappa` (metrics over `x_2 ..= x_n`). Below that, failures are
/// possible but not certain.
pub fn predict_marginal_single_iforest(metrics: &DensityMetrics, gap: f64) -> ThresholdReport {
    let threshold = metrics.max_gap * metrics.kappa;
    ThresholdReport::new(AnomalyType::MarginalSingle, Detector::Iforest, gap, threshold, true, inputs(metrics))
}

/// Marginal single anomaly under k-NN: detected iff `gap > U + (k-1) delta / 2`.
pub fn predict_marginal_single_knn(metrics: &DensityMetrics, gap: f64, k: usize) -> ThresholdReport {
    let threshold = metrics.max_gap + (k as f64 - 1.0) * metrics.delta / 2.0;
    let mut inp = inputs(metrics);
    inp.k = Some(k);
    ThresholdReport::new(AnomalyType::MarginalSingle, Detector::Knn, gap, threshold, false, inp)
}

fn require_k(k: Option<usize>) -> Result<usize> {
    match k {
        Some(k) if k >= 1 => Ok(k),
        _ => Err(Error::InvalidParams("k-NN predictors need k >= 1".into())),
    }
}

/// Central single anomaly. `metrics` are taken over the normal gaps (both
/// blocks), `theta` is the smaller of the two gaps around the anomaly.
pub fn predict_central_single(
    detector: Detector,
    metrics: &DensityMetrics,
    theta: f64,
    n0: usize,
    k: Option<usize>,
    calibration: Calibration,
) -> Result<ThresholdReport> {
    if n0 % 2 == 1 {
        return Err(Error::OddN0(n0));
    }
    let mut inp = inputs(metrics);
    inp.n0 = Some(n0);
    let threshold = match detector {
        Detector::Iforest => {
            let c = match calibration {
                Calibration::Default => calibration::shipped().central_iforest,
                Calibration::Constant(c) => c,
                Calibration::ExactBound => {
                    return Err(Error::InvalidParams("no exact bound for central iForest".into()))
                }
            };
            inp.constant = Some(c);
            c * (n0 as f64 * metrics.kappa).sqrt()
        }
        Detector::Knn => {
            let k = require_k(k)?;
            inp.k = Some(k);
            match calibration {
                Calibration::Default | Calibration::ExactBound => {
                    let even = (k + k % 2) as f64;
                    (even + 1.0) / 2.0 * metrics.max_gap - (even / 2.0 - 1.0) / 2.0 * metrics.min_gap
                }
                Calibration::Constant(c) => {
                    inp.constant = Some(c);
                    c * k as f64 * metrics.delta
                }
            }
        }
    };
    Ok(ThresholdReport::new(AnomalyType::CentralSingle, detector, theta, threshold, false, inp))
}

/// Marginal clustered anomalies: `n1` anomalies at one end, `theta` is the
/// gap between the cluster and the normal block.
pub fn predict_marginal_clustered(
    detector: Detector,
    metrics: &DensityMetrics,
    theta: f64,
    n1: usize,
    k: Option<usize>,
    calibration: Calibration,
) -> Result<ThresholdReport> {
    let mut inp = inputs(metrics);
    inp.n1 = Some(n1);
    let shipped = calibration::shipped();
    let constant = |default: f64| match calibration {
        Calibration::Default => Ok(default),
        Calibration::Constant(c) => Ok(c),
        Calibration::ExactBound => Err(Error::InvalidParams("no exact bound for clustered anomalies".into())),
    };
    let mut warnings = Vec::new();
    let threshold = match detector {
        Detector::Iforest => {
            if n1.is_multiple_of(2) {
                return Err(Error::EvenN1(n1));
            }
            let c = constant(shipped.clustered_iforest)?;
            inp.constant = Some(c);
            c * (n1 * n1) as f64 * metrics.kappa
        }
        Detector::Knn => {
            let k = require_k(k)?;
            if k <= n1 {
                warnings.push(format!("k = {k} <= n1 = {n1}: cluster members can be each other's neighbours and be missed"));
            }
            let c = constant(shipped.clustered_knn)?;
            inp.k = Some(k);
            inp.constant = Some(c);
            c * k as f64 * metrics.delta
        }
    };
    let mut report = ThresholdReport::new(AnomalyType::MarginalClustered, detector, theta, threshold, false, inp);
    report.warnings = warnings;
    Ok(report)
}

/// Result of checking `kappa >= sqrt(n + 3)` on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub n: usize,
    pub kappa: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn verify_assumption(s: &SortedSample1D) -> Result<AssumptionCheck> {
    let n = s.len();
    if n < 3 {
        return Err(Error::NotEnoughPoints { needed: 3, got: n });
    }
    let kappa = full_density_metrics(s)?.kappa;
    let bound = ((n + 3) as f64).sqrt();
    Ok(AssumptionCheck { n, kappa, bound, pass: kappa >= bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnCheck {
    pub column: String,
    pub n: usize,
    pub kappa: Option<f64>,
    pub bound: f64,
    pub pass: bool,
    /// Distinct values and at least three points.
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSummary {
    pub columns: Vec<ColumnCheck>,
    pub successful: usize,
    pub valid: usize,
    pub total: usize,
}

impl AssumptionSummary {
    /// `column,n,kappa,bound,pass,valid`; `kappa` is empty for invalid columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["column", "n", "kappa", "bound", "pass", "valid"])?;
        for c in &self.columns {
            w.write_record([
                c.column.clone(),
                c.n.to_string(),
                c.kappa.map(|k| k.to_string()).unwrap_or_default(),
                c.bound.to_string(),
                c.pass.to_string(),
                c.valid.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

/// Checks every column of `data`; columns with repeated values or fewer than
/// three points are counted as invalid.
pub fn verify_columns(data: &Dataset) -> AssumptionSummary {
    let columns: Vec<ColumnCheck> = (0..data.d())
        .map(|j| {
            let n = data.n();
            let bound = ((n + 3) as f64).sqrt();
            let name = data.column_names()[j].clone();
            match sort_and_validate(data.column(j)).and_then(|s| verify_assumption(&s)) {
                Ok(c) => ColumnCheck { column: name, n, kappa: Some(c.kappa), bound, pass: c.pass, valid: true },
                Err(_) => ColumnCheck { column: name, n, kappa: None, bound, pass: false, valid: false },
            }
        })
        .collect();
    AssumptionSummary {
        successful: columns.iter().filter(|c| c.pass).count(),
        valid: columns.iter().filter(|c| c.valid).count(),
        total: columns.len(),
        columns,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    MarginalSingle,
    CentralSingle,
    MarginalClustered,
    CounterexampleMarginal,
    CounterexampleCentral,
    CounterexampleClustered,
}

/// Parameters for [`construct_case`]; each kind reads the fields it needs.
///
/// Normal blocks alternate gaps `normal_gap` and `normal_gap / kappa`, so a
/// block of two or more gaps has density factor exactly `kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseParams {
    /// Total points (marginal kinds).
    pub n: usize,
    /// Normal points (central and clustered kinds).
    pub n0: usize,
    /// Clustered anomalies.
    pub n1: usize,
    pub normal_gap: f64,
    pub kappa: f64,
    /// Anomaly gap `x_2 - x_1`, or `theta` for central/clustered kinds.
    pub anomaly_gap: f64,
    /// Perturbation of the leading gap in the marginal counterexample;
    /// defaults to `0.01 * normal_gap`.
    pub epsilon: Option<f64>,
}

impl Default for CaseParams {
    fn default() -> Self {
        Self { n: 10, n0: 10, n1: 3, normal_gap: 1.0, kappa: 1.0, anomaly_gap: 5.0, epsilon: None }
    }
}

/// A constructed dataset with its ground-truth anomalies (1-based indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructedCase {
    pub kind: CaseKind,
    pub sample: SortedSample1D,
    pub anomalies: Vec<usize>,
}

/// `count` gaps alternating `gap`, `gap / kappa`, starting with `gap`.
pub fn dense_gaps(count: usize, gap: f64, kappa: f64) -> Vec<f64> {
    (0..count).map(|t| if t % 2 == 0 { gap } else { gap / kappa }).collect()
}

pub fn construct_case(kind: CaseKind, p: &CaseParams) -> Result<ConstructedCase> {
    let positive = |name: &str, v: f64| {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
        }
    };
    positive("normal_gap", p.normal_gap)?;
    if !(p.kappa >= 1.0) || !p.kappa.is_finite() {
        return Err(Error::InvalidParams(format!("kappa must be >= 1, got {}", p.kappa)));
    }
    let u = p.normal_gap;
    let (gaps, anomalies) = match kind {
        CaseKind::MarginalSingle => {
            positive("anomaly_gap", p.anomaly_gap)?;
            if p.n < 2 {
                return Err(Error::InvalidParams("marginal_single needs n >= 2".into()));
            }
            let mut g = vec![p.anomaly_gap];
            g.extend(dense_gaps(p.n - 2, u, p.kappa));
            (g, vec![1])
        }
        CaseKind::CounterexampleMarginal => {
            if p.n < 3 {
                return Err(Error::InvalidParams("counterexample_marginal needs n >= 3".into()));
            }
            let eps = p.epsilon.unwrap_or(0.01 * u);
            positive("epsilon", eps)?;
            let mut g = vec![u + eps, u / 2.0];
            g.extend(std::iter::repeat_n(u, p.n - 3));
            (g, vec![1])
        }
        CaseKind::CentralSingle | CaseKind::CounterexampleCentral => {
            positive("anomaly_gap", p.anomaly_gap)?;
            if p.n0 % 2 == 1 {
                return Err(Error::OddN0(p.n0));
            }
            if p.n0 < 2 {
                return Err(Error::InvalidParams("central cases need n0 >= 2".into()));
            }
            let half = p.n0 / 2 - 1;
            let (gap, kappa) = if kind == CaseKind::CounterexampleCentral { (1.0, 1.0) } else { (u, p.kappa) };
            let mut g: Vec<f64> = dense_gaps(half, gap, kappa).into_iter().rev().collect();
            g.extend([p.anomaly_gap, p.anomaly_gap]);
            g.extend(dense_gaps(half, gap, kappa));
            (g, vec![p.n0 / 2 + 1])
        }
        CaseKind::MarginalClustered | CaseKind::CounterexampleClustered => {
            positive("anomaly_gap", p.anomaly_gap)?;
            if p.n1.is_multiple_of(2) {
                return Err(Error::EvenN1(p.n1));
            }
            if p.n0 < 1 {
                return Err(Error::InvalidParams("clustered cases need n0 >= 1".into()));
            }
            let (gap, kappa) = if kind == CaseKind::CounterexampleClustered { (1.0, 1.0) } else { (u, p.kappa) };
            let mut g = dense_gaps(p.n1 - 1, gap, kappa);
            g.push(p.anomaly_gap);
            g.extend(dense_gaps(p.n0 - 1, gap, kappa));
            (g, (1..=p.n1).collect())
        }
    };
    let sample = SortedSample1D::from_gaps(0.0, &gaps)?;
    Ok(ConstructedCase { kind, sample, anomalies })
}

fn split_scores(values: &[f64], anomalies: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = values.len();
    let mut is_anomaly = vec![false; n];
    for &a in anomalies {
        if a == 0 || a > n {
            return Err(Error::IndexOutOfBounds { index: a, len: n });
        }
        is_anomaly[a - 1] = true;
    }
    let (a, b): (Vec<_>, Vec<_>) = values.iter().zip(&is_anomaly).partition(|(_, &f)| f);
    Ok((a.into_iter().map(|(v, _)| *v).collect(), b.into_iter().map(|(v, _)| *v).collect()))
}

/// Every anomaly has a strictly smaller expected depth than every normal point.
pub fn iforest_detects(s: &SortedSample1D, anomalies: &[usize]) -> Result<bool> {
    let profile = depth_profile(s)?;
    let (anom, normal) = split_scores(&profile.expected_depths, anomalies)?;
    let worst = anom.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(normal.iter().all(|&h| worst < h))
}

/// Every anomaly has a strictly larger k-NN score than every normal point.
pub fn knn_detects(s: &SortedSample1D, anomalies: &[usize], k: usize) -> Result<bool> {
    let scores = knn_scores(&Dataset::from_column(s.values())?, &KnnConfig::new(k))?;
    let (anom, normal) = split_scores(&scores, anomalies)?;
    let weakest = anom.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(normal.iter().all(|&h| weakest > h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::density_metrics;
    use crate::oracle::{depth_profile, expected_depth_at_sample, rank_by_depth};

    fn case(kind: CaseKind, p: CaseParams) -> ConstructedCase {
        construct_case(kind, &p).unwrap()
    }

    #[test]
    fn assumption_examples() {
        // n = 101 points whose gaps span a factor of 20
        let mut gaps = vec![1.0; 100];
        gaps[50] = 20.0;
        let x = SortedSample1D::from_gaps(0.0, &gaps).unwrap();
        let c = verify_assumption(&x).unwrap();
        assert_eq!((c.n, c.kappa), (101, 20.0));
        assert!((c.bound - 104f64.sqrt()).abs() < 1e-12 && c.pass);

        let even = SortedSample1D::new((0..13).map(f64::from).collect::<Vec<_>>()).unwrap();
        let c = verify_assumption(&even).unwrap();
        assert_eq!((c.kappa, c.bound, c.pass), (1.0, 4.0, false));

        assert!(matches!(verify_assumption(&SortedSample1D::new(vec![0.0, 1.0]).unwrap()), Err(Error::NotEnoughPoints { .. })));
    }

    #[test]
    fn batch_counts_invalid_columns() {
        let rows: Vec<Vec<f64>> = (0..6).map(|r| vec![r as f64, (r * r) as f64, (r / 2) as f64]).collect();
        let ds = Dataset::from_rows(&rows, None).unwrap();
        let s = verify_columns(&ds);
        assert_eq!((s.valid, s.total), (2, 3));
        assert!(!s.columns[2].valid);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("column,n,kappa,bound,pass,valid\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn marginal_single_iforest_reports() {
        let m = DensityMetrics::from_bounds(1.0, 1.0).unwrap();
        let r = predict_marginal_single_iforest(&m, 1.5);
        assert_eq!((r.threshold, r.verdict), (1.0, Verdict::Detected));
        let x = case(CaseKind::MarginalSingle, CaseParams { n: 12, anomaly_gap: 1.5, ..Default::default() });
        assert_eq!(rank_by_depth(&depth_profile(&x.sample).unwrap(), 1).unwrap(), vec![1]);

        let m = DensityMetrics::from_bounds(1.0, 0.5).unwrap();
        let r = predict_marginal_single_iforest(&m, 1.5);
        assert_eq!((r.threshold, r.decision, r.verdict), (2.0, false, Verdict::NotGuaranteed));
        let r = predict_marginal_single_iforest(&m, 2.0);
        assert_eq!(r.verdict, Verdict::NotGuaranteed);
    }

    #[test]
    fn marginal_single_knn_reports() {
        let m = DensityMetrics::from_bounds(2.0, 1.0).unwrap();
        let r = predict_marginal_single_knn(&m, 3.1, 3);
        assert_eq!((r.threshold, r.verdict), (3.0, Verdict::Detected));
        let flat = DensityMetrics::from_bounds(1.0, 1.0).unwrap();
        for k in [1, 2, 4] {
            assert!(predict_marginal_single_knn(&flat, 1.01, k).decision);
            let r = predict_marginal_single_knn(&flat, 0.99, k);
            assert_eq!(r.verdict, Verdict::NotDetected);
        }
    }

    #[test]
    fn knn_marginal_flip_matches_scores() {
        for k in [1, 2, 3, 5] {
            for (factor, expect) in [(1.01, true), (0.99, false)] {
                let x = case(CaseKind::MarginalSingle, CaseParams { n: 20, anomaly_gap: factor, ..Default::default() });
                assert_eq!(knn_detects(&x.sample, &x.anomalies, k).unwrap(), expect, "k={k} factor={factor}");
            }
        }
    }

    #[test]
    fn central_reports() {
        let m = DensityMetrics::from_bounds(1.0, 1.0).unwrap();
        let r = predict_central_single(Detector::Iforest, &m, 11.0, 100, None, Calibration::Constant(1.0)).unwrap();
        assert_eq!(r.threshold, 10.0);
        assert!(r.decision);
        assert!(matches!(
            predict_central_single(Detector::Iforest, &m, 1.0, 7, None, Calibration::Default),
            Err(Error::OddN0(7))
        ));
        assert!(predict_central_single(Detector::Knn, &m, 1.0, 8, None, Calibration::Default).is_err());
    }

    #[test]
    fn central_knn_exact_bound_is_two_sided() {
        // unit gaps: bound = (k+1)/2 - (k/2-1)/2 = k/4 + 1
        let n0 = 40;
        for k in [2, 4, 6, 8] {
            let m = DensityMetrics::from_bounds(1.0, 1.0).unwrap();
            let bound = predict_central_single(Detector::Knn, &m, 0.0, n0, Some(k), Calibration::ExactBound).unwrap().threshold;
            assert!((bound - (k as f64 / 4.0 + 1.0)).abs() < 1e-12);
            for (theta, expect) in [(bound * 1.01, true), (bound * 0.99, false)] {
                let x = case(CaseKind::CounterexampleCentral, CaseParams { n0, anomaly_gap: theta, ..Default::default() });
                let r = predict_central_single(Detector::Knn, &m, theta, n0, Some(k), Calibration::Default).unwrap();
                assert_eq!(r.decision, expect);
                assert_eq!(knn_detects(&x.sample, &x.anomalies, k).unwrap(), expect, "k={k} theta={theta}");
            }
        }
    }

    #[test]
    fn central_counterexample_hides_anomaly() {
        let x = case(CaseKind::CounterexampleCentral, CaseParams { n0: 400, anomaly_gap: 3.0, ..Default::default() });
        let p = depth_profile(&x.sample).unwrap().expected_depths;
        let a = x.anomalies[0];
        assert!(p.iter().any(|&h| h < p[a - 1]));
        assert!(!iforest_detects(&x.sample, &x.anomalies).unwrap());
    }

    #[test]
    fn clustered_reports() {
        let m = DensityMetrics::from_bounds(1.0, 1.0).unwrap();
        let r = predict_marginal_clustered(Detector::Iforest, &m, 10.0, 3, None, Calibration::Constant(1.0)).unwrap();
        assert_eq!((r.threshold, r.decision), (9.0, true));
        assert!(matches!(
            predict_marginal_clustered(Detector::Iforest, &m, 10.0, 4, None, Calibration::Default),
            Err(Error::EvenN1(4))
        ));
        let r = predict_marginal_clustered(Detector::Knn, &m, 10.0, 3, Some(1), Calibration::Default).unwrap();
        assert_eq!(r.warnings.len(), 1);
        let r = predict_marginal_clustered(Detector::Knn, &m, 10.0, 3, Some(7), Calibration::Default).unwrap();
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn small_k_misses_cluster_iforest_does_not() {
        let x = case(CaseKind::MarginalClustered, CaseParams { n1: 3, n0: 40, anomaly_gap: 10.0, ..Default::default() });
        let scores = knn_scores(&Dataset::from_column(x.sample.values()).unwrap(), &KnnConfig::new(1)).unwrap();
        assert!(scores[..3].iter().all(|&s| s == 1.0));
        assert!(!knn_detects(&x.sample, &x.anomalies, 1).unwrap());
        assert!(iforest_detects(&x.sample, &x.anomalies).unwrap());
        let ranked = rank_by_depth(&depth_profile(&x.sample).unwrap(), 3).unwrap();
        let mut sorted = ranked.clone();
        sorted.sort();
        assert_eq!(sorted, vec![1, 2, 3]);
    }

    #[test]
    fn constructor_examples() {
        let x = case(CaseKind::MarginalSingle, CaseParams { n: 10, normal_gap: 1.0, anomaly_gap: 5.0, ..Default::default() });
        assert_eq!(x.sample.values(), &[0.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0]);
        assert_eq!(x.anomalies, vec![1]);

        let x = case(CaseKind::CounterexampleMarginal, CaseParams { n: 6, normal_gap: 1.0, ..Default::default() });
        let g = x.sample.gaps();
        assert_eq!(g.len(), 5);
        assert!((g[0] - 1.01).abs() < 1e-12);
        for (a, b) in g[1..].iter().zip([0.5, 1.0, 1.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }

        let x = case(CaseKind::CentralSingle, CaseParams { n0: 6, anomaly_gap: 4.0, ..Default::default() });
        assert_eq!(x.sample.gaps(), vec![1.0, 1.0, 4.0, 4.0, 1.0, 1.0]);
        assert_eq!(x.anomalies, vec![4]);

        let x = case(CaseKind::CounterexampleClustered, CaseParams { n1: 3, n0: 4, anomaly_gap: 7.0, ..Default::default() });
        assert_eq!(x.sample.gaps(), vec![1.0, 1.0, 7.0, 1.0, 1.0, 1.0]);
        assert_eq!(x.anomalies, vec![1, 2, 3]);
    }

    #[test]
    fn constructor_validation() {
        assert!(matches!(
            construct_case(CaseKind::CentralSingle, &CaseParams { n0: 5, ..Default::default() }),
            Err(Error::OddN0(5))
        ));
        assert!(matches!(
            construct_case(CaseKind::MarginalClustered, &CaseParams { n1: 2, ..Default::default() }),
            Err(Error::EvenN1(2))
        ));
        assert!(construct_case(CaseKind::MarginalSingle, &CaseParams { anomaly_gap: -1.0, ..Default::default() }).is_err());
        assert!(construct_case(CaseKind::MarginalSingle, &CaseParams { kappa: 0.5, ..Default::default() }).is_err());
    }

    #[test]
    fn dense_blocks_have_requested_kappa() {
        let x = case(CaseKind::MarginalSingle, CaseParams { n: 12, kappa: 1.5, anomaly_gap: 3.0, ..Default::default() });
        let m = density_metrics(&x.sample, 2, 11).unwrap();
        assert!((m.kappa - 1.5).abs() < 1e-12);
        assert_eq!(m.max_gap, 1.0);
    }

    #[test]
    fn marginal_counterexample_reverses_order() {
        for n in 6..15 {
            let x = case(CaseKind::CounterexampleMarginal, CaseParams { n, normal_gap: 1.0, ..Default::default() });
            let first = expected_depth_at_sample(&x.sample, 1).unwrap();
            let last = expected_depth_at_sample(&x.sample, n).unwrap();
            assert!(first > last, "n={n}");
        }
    }

    #[test]
    fn report_json_shape() {
        let m = DensityMetrics::from_bounds(2.0, 1.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&predict_marginal_single_knn(&m, 3.1, 3).to_json().unwrap()).unwrap();
        assert_eq!(v["anomaly_type"], "marginal_single");
        assert_eq!(v["detector"], "knn");
        assert_eq!(v["decision"], true);
        assert_eq!(v["inputs"]["k"], 3);
    }

    #[test]
    fn constructed_cases_validate() {
        for kind in [
            CaseKind::MarginalSingle,
            CaseKind::CentralSingle,
            CaseKind::MarginalClustered,
            CaseKind::CounterexampleMarginal,
            CaseKind::CounterexampleCentral,
            CaseKind::CounterexampleClustered,
        ] {
            let x = construct_case(kind, &CaseParams::default()).unwrap();
            assert!(sort_and_validate(x.sample.values().to_vec()).is_ok());
            assert!(x.anomalies.iter().all(|&a| a >= 1 && a <= x.sample.len()));
        }
    }
}
