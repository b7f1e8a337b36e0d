//! Isolation Forest on small numeric data, together with the exact expected
//! isolation depth of 1-D samples, the random-walk view of tree growth, and a
//! k-NN baseline.
//!
//! Sample point indices are 1-based everywhere in the public API.

// NaN-rejecting guards read as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod casestudy;
pub mod data;
pub mod error;
pub mod forest;
pub mod harness;
pub mod knn;
pub mod oracle;
pub mod rng;
pub mod walk;

pub use data::{density_metrics, full_density_metrics, load_csv, read_csv, sort_and_validate, Dataset, DensityMetrics, SortedSample1D};
pub use error::{Error, Result};
pub use forest::{fit_forest, score, Forest, ITree};
pub use knn::{knn_score, knn_scores, rank_by_knn, KnnConfig};
pub use oracle::{depth_profile, expected_depth_any, expected_depth_at_sample, rank_by_depth, DepthProfile};
pub use walk::{absorption_cdf, build_chain, expected_steps, WalkChain};
