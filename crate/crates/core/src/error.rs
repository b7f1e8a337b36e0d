use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// Sample indices carried by variants are 1-based, matching the rest of the
/// public API.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("non-finite value {value} at position {position}")]
    NonFiniteValue { position: usize, value: f64 },

    #[error("duplicate value {0}")]
    DuplicateValue(f64),

    #[error("gap range {first}..={last} is invalid for a sample with {gaps} gaps")]
    RangeOutOfBounds { first: usize, last: usize, gaps: usize },

    #[error("need at least {needed} points, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("index {index} out of bounds 1..={len}")]
    IndexOutOfBounds { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("k = {k} exceeds the {available} available neighbours")]
    KTooLarge { k: usize, available: usize },

    #[error("n0 = {0} must be even")]
    OddN0(usize),

    #[error("n1 = {0} must be odd")]
    EvenN1(usize),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column {column:?}")]
    Parse { row: usize, column: String },

    #[error("no numeric columns")]
    NoNumericColumns,

    #[error("unknown column {0:?}")]
    UnknownColumn(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("unsupported document version {0}")]
    UnsupportedVersion(u32),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
