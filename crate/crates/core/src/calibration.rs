//! Constants for the order-of-magnitude detection thresholds.
//!
//! Each constant is found by bisecting on the anomaly gap `theta` until the
//! exact detector (oracle depths or k-NN scores) just separates the anomalies,
//! then dividing by the threshold's shape (`sqrt(n0 kappa)`, `n1^2 kappa` or
//! `k delta`). The shipped value is the largest ratio over a grid, rounded up
//! to the next multiple of 0.05, so predictions are on the safe side there.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::casestudy::{construct_case, iforest_detects, knn_detects, CaseKind, CaseParams};
use crate::error::{Error, Result};

pub const CALIBRATION_FORMAT: &str = "isodepth-calibration";
pub const CALIBRATION_VERSION: u32 = 1;

const SHIPPED: &str = include_str!("../calibration.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub central_n0: Vec<usize>,
    pub clustered_n1: Vec<usize>,
    pub clustered_n0: usize,
    pub knn_k: Vec<usize>,
    pub knn_n1: usize,
    pub kappas: Vec<f64>,
    /// Clustered k-NN needs `delta > 0`, so `kappa = 1` is skipped there.
    pub knn_kappas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub format: String,
    pub version: u32,
    pub central_iforest: f64,
    pub clustered_iforest: f64,
    pub clustered_knn: f64,
    pub grid: SweepGrid,
}

impl CalibrationTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(text)?;
        if t.format != CALIBRATION_FORMAT {
            return Err(Error::InvalidConfig(format!("not a calibration file: format {:?}", t.format)));
        }
        if t.version != CALIBRATION_VERSION {
            return Err(Error::UnsupportedVersion(t.version));
        }
        Ok(t)
    }
}

pub fn shipped() -> &'static CalibrationTable {
    static TABLE: OnceLock<CalibrationTable> = OnceLock::new();
    TABLE.get_or_init(|| CalibrationTable::from_json(SHIPPED).expect("bundled calibration file is valid"))
}

/// One grid cell: the smallest detecting gap and its ratio to the shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n0: usize,
    pub n1: usize,
    pub k: usize,
    pub kappa: f64,
    pub theta_star: f64,
    pub ratio: f64,
}

/// Smallest `theta` with `detects(theta)`, assuming detection is monotone in
/// `theta`. Relative precision `1e-9`.
pub fn critical_theta(detects: impl Fn(f64) -> Result<bool>) -> Result<f64> {
    let mut lo = 1e-6;
    if detects(lo)? {
        return Ok(lo);
    }
    let mut hi = 1.0;
    while !detects(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParams("anomaly is never separated".into()));
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if detects(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn params(n0: usize, n1: usize, kappa: f64, theta: f64) -> CaseParams {
    CaseParams { n0, n1, kappa, anomaly_gap: theta, normal_gap: 1.0, ..Default::default() }
}

pub fn sweep_central_iforest(n0s: &[usize], kappas: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &n0 in n0s {
        for &kappa in kappas {
            let theta_star = critical_theta(|t| {
                let c = construct_case(CaseKind::CentralSingle, &params(n0, 1, kappa, t))?;
                iforest_detects(&c.sample, &c.anomalies)
            })?;
            let ratio = theta_star / (n0 as f64 * kappa).sqrt();
            out.push(SweepPoint { n0, n1: 1, k: 0, kappa, theta_star, ratio });
        }
    }
    Ok(out)
}

pub fn sweep_clustered_iforest(n1s: &[usize], n0: usize, kappas: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &n1 in n1s {
        for &kappa in kappas {
            let theta_star = critical_theta(|t| {
                let c = construct_case(CaseKind::MarginalClustered, &params(n0, n1, kappa, t))?;
                iforest_detects(&c.sample, &c.anomalies)
            })?;
            let ratio = theta_star / ((n1 * n1) as f64 * kappa);
            out.push(SweepPoint { n0, n1, k: 0, kappa, theta_star, ratio });
        }
    }
    Ok(out)
}

pub fn sweep_clustered_knn(ks: &[usize], n1: usize, n0: usize, kappas: &[f64]) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for &k in ks {
        for &kappa in kappas {
            if kappa <= 1.0 {
                return Err(Error::InvalidParams("clustered k-NN sweep needs kappa > 1".into()));
            }
            let theta_star = critical_theta(|t| {
                let c = construct_case(CaseKind::MarginalClustered, &params(n0, n1, kappa, t))?;
                knn_detects(&c.sample, &c.anomalies, k)
            })?;
            let delta = 1.0 - 1.0 / kappa;
            out.push(SweepPoint { n0, n1, k, kappa, theta_star, ratio: theta_star / (k as f64 * delta) });
        }
    }
    Ok(out)
}

fn ceil_to_twentieth(x: f64) -> f64 {
    (x * 20.0).ceil() / 20.0
}

fn max_ratio(points: &[SweepPoint]) -> f64 {
    points.iter().map(|p| p.ratio).fold(0.0, f64::max)
}

/// Runs all three sweeps over `grid` and returns the resulting table.
pub fn calibrate(grid: &SweepGrid) -> Result<CalibrationTable> {
    let central = sweep_central_iforest(&grid.central_n0, &grid.kappas)?;
    let clustered = sweep_clustered_iforest(&grid.clustered_n1, grid.clustered_n0, &grid.kappas)?;
    let knn = sweep_clustered_knn(&grid.knn_k, grid.knn_n1, grid.clustered_n0, &grid.knn_kappas)?;
    Ok(CalibrationTable {
        format: CALIBRATION_FORMAT.into(),
        version: CALIBRATION_VERSION,
        central_iforest: ceil_to_twentieth(max_ratio(&central)),
        clustered_iforest: ceil_to_twentieth(max_ratio(&clustered)),
        clustered_knn: ceil_to_twentieth(max_ratio(&knn)),
        grid: grid.clone(),
    })
}
