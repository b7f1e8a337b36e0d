//! Sample containers, validation, density metrics and CSV ingestion.

use std::path::Path;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream;

/// A strictly increasing, finite, non-empty 1-D sample.
///
/// Point indices into a sample are 1-based throughout the crate: `x_1` is the
/// smallest value.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SortedSample1D {
    values: Vec<f64>,
}

impl SortedSample1D {
    /// Sorts `samples` ascending and validates them.
    pub fn new(samples: impl Into<Vec<f64>>) -> Result<Self> {
        sort_and_validate(samples.into())
    }

    /// Builds a sample anchored at `start` from a sequence of adjacent gaps.
    pub fn from_gaps(start: f64, gaps: &[f64]) -> Result<Self> {
        let mut values = Vec::with_capacity(gaps.len() + 1);
        let mut acc = start;
        values.push(acc);
        for &g in gaps {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParams(format!("gap {g} must be positive and finite")));
            }
            acc += g;
            values.push(acc);
        }
        sort_and_validate(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of the 1-based point `i`.
    pub fn get(&self, i: usize) -> Option<f64> {
        i.checked_sub(1).and_then(|k| self.values.get(k).copied())
    }

    /// Adjacent gaps; entry `k` (0-based) is gap `k + 1`, i.e. `x_{k+2} - x_{k+1}`.
    pub fn gaps(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// The contiguous sub-sample `x_first ..= x_last` (1-based, inclusive).
    pub fn slice(&self, first: usize, last: usize) -> Result<Self> {
        let n = self.len();
        if first == 0 || first > last || last > n {
            return Err(Error::IndexOutOfBounds { index: if first == 0 { 0 } else { last }, len: n });
        }
        Ok(Self { values: self.values[first - 1..last].to_vec() })
    }

    /// `a * x + b` applied pointwise; `a` must be positive.
    pub fn affine(&self, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::InvalidParams(format!("scale {a} must be positive")));
        }
        sort_and_validate(self.values.iter().map(|v| a * v + b).collect())
    }

    /// The sample `-x` (reverses the point order).
    pub fn reflect(&self) -> Self {
        Self { values: self.values.iter().rev().map(|v| -v).collect() }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl<'de> Deserialize<'de> for SortedSample1D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        sort_and_validate(values).map_err(serde::de::Error::custom)
    }
}

/// Sorts ascending; rejects empty input, non-finite values and duplicates.
pub fn sort_and_validate(mut samples: Vec<f64>) -> Result<SortedSample1D> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some((position, &value)) = samples.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFiniteValue { position, value });
    }
    samples.sort_by(f64::total_cmp);
    if let Some(w) = samples.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateValue(w[0]));
    }
    Ok(SortedSample1D { values: samples })
}

/// Adds seeded uniform noise in `[-eps, eps]` to every value. Used to break
/// ties before validation.
pub fn jitter(values: &[f64], eps: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, u64::MAX);
    values
        .iter()
        .map(|v| if eps > 0.0 { v + rng.random_range(-eps..=eps) } else { *v })
        .collect()
}

/// Max/min adjacent gap over a designated gap range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMetrics {
    /// `U`, the largest gap in the range.
    pub max_gap: f64,
    /// `L`, the smallest gap in the range.
    pub min_gap: f64,
    /// `U / L`.
    pub kappa: f64,
    /// `U - L`.
    pub delta: f64,
    /// 1-based inclusive gap range the metrics were taken over.
    pub gap_range: (usize, usize),
}

impl DensityMetrics {
    /// Metrics from explicit `U` and `L`, with no associated sample.
    pub fn from_bounds(max_gap: f64, min_gap: f64) -> Result<Self> {
        if !(min_gap > 0.0) || !(max_gap >= min_gap) || !max_gap.is_finite() {
            return Err(Error::InvalidParams(format!("need 0 < L <= U, got U={max_gap}, L={min_gap}")));
        }
        Ok(Self {
            max_gap,
            min_gap,
            kappa: max_gap / min_gap,
            delta: max_gap - min_gap,
            gap_range: (0, 0),
        })
    }
}

/// Density metrics over gaps `first_gap ..= last_gap`, where gap `i` is
/// `x_{i+1} - x_i`.
pub fn density_metrics(s: &SortedSample1D, first_gap: usize, last_gap: usize) -> Result<DensityMetrics> {
    let n = s.len();
    if n < 2 {
        return Err(Error::NotEnoughPoints { needed: 2, got: n });
    }
    let gaps = n - 1;
    if first_gap == 0 || first_gap > last_gap || last_gap > gaps {
        return Err(Error::RangeOutOfBounds { first: first_gap, last: last_gap, gaps });
    }
    let v = s.values();
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in first_gap..=last_gap {
        let g = v[i] - v[i - 1];
        hi = hi.max(g);
        lo = lo.min(g);
    }
    Ok(DensityMetrics {
        max_gap: hi,
        min_gap: lo,
        kappa: hi / lo,
        delta: hi - lo,
        gap_range: (first_gap, last_gap),
    })
}

/// Density metrics over every gap of the sample.
pub fn full_density_metrics(s: &SortedSample1D) -> Result<DensityMetrics> {
    density_metrics(s, 1, s.len().saturating_sub(1).max(1))
}

/// An `n x d` matrix of finite reals with column labels, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    values: Vec<f64>,
    n: usize,
    d: usize,
    column_names: Vec<String>,
}

impl Dataset {
    pub fn from_rows(rows: &[Vec<f64>], column_names: Option<Vec<String>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        let mut values = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, n, d, column_names)
    }

    pub fn from_flat(values: Vec<f64>, n: usize, d: usize, column_names: Option<Vec<String>>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput);
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch { expected: n * d, got: values.len() });
        }
        if let Some((position, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { position, value });
        }
        let column_names = match column_names {
            Some(names) if names.len() != d => {
                return Err(Error::DimensionMismatch { expected: d, got: names.len() })
            }
            Some(names) => names,
            None => (0..d).map(|j| format!("x{j}")).collect(),
        };
        Ok(Self { values, n, d, column_names })
    }

    /// One-column dataset.
    pub fn from_column(values: &[f64]) -> Result<Self> {
        Self::from_flat(values.to_vec(), values.len(), 1, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Row `r` (0-based storage index).
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.d..(r + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn value(&self, r: usize, j: usize) -> f64 {
        self.values[r * self.d + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|row| row[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Reads a headed CSV file into a [`Dataset`].
///
/// With an explicit `columns` selection every selected column must parse as a
/// real. Without one, a column whose first data cell is not numeric is skipped
/// with a warning; a column that starts numeric and later fails to parse is an
/// error. Rows in error messages are 1-based data rows (header excluded).
pub fn load_csv(path: impl AsRef<Path>, columns: Option<&[String]>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv(file, columns)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, columns: Option<&[String]>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let records: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>()?;
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }

    let selected: Vec<usize> = match columns {
        Some(names) => names
            .iter()
            .map(|name| header.iter().position(|h| h == name).ok_or_else(|| Error::UnknownColumn(name.clone())))
            .collect::<Result<_>>()?,
        None => (0..header.len())
            .filter(|&j| {
                let numeric = records[0].get(j).is_some_and(|c| c.parse::<f64>().is_ok());
                if !numeric {
                    warn!("skipping non-numeric column {:?}", header[j]);
                }
                numeric
            })
            .collect(),
    };
    if selected.is_empty() {
        return Err(Error::NoNumericColumns);
    }

    let mut values = Vec::with_capacity(records.len() * selected.len());
    for (r, record) in records.iter().enumerate() {
        for &j in &selected {
            let parsed = record.get(j).and_then(|c| c.parse::<f64>().ok()).filter(|v| v.is_finite());
            match parsed {
                Some(v) => values.push(v),
                None => return Err(Error::Parse { row: r + 1, column: header[j].clone() }),
            }
        }
    }
    let names = selected.iter().map(|&j| header[j].clone()).collect();
    Dataset::from_flat(values, records.len(), selected.len(), Some(names))
}
