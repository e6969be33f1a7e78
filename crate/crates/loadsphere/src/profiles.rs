//! Ingestion, validation, and standardization of daily load-profile matrices.
//!
//! Standardizing each row to zero mean and unit (population) variance pins
//! every row onto the radius-`sqrt(D)` hypersphere; dividing by `sqrt(D)`
//! afterwards puts the rows on the unit hypersphere.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indices;

/// Rows with a standard deviation at or below this are treated as constant.
pub const EPS_VAR: f64 = 1e-12;

const MINUTES_PER_DAY: u32 = 1440;

/// Raw M x D daily readings, one row per meter.
#[derive(Debug, Clone)]
pub struct ProfileMatrix {
    values: DMatrix<f64>,
    meter_ids: Vec<String>,
    resolution_minutes: u32,
}

/// Row-standardized matrix; every row has mean 0 and norm `sqrt(D)`.
#[derive(Debug, Clone)]
pub struct StandardizedMatrix {
    values: DMatrix<f64>,
    meter_ids: Vec<String>,
}

/// Unit-norm rows, obtained by scaling a [`StandardizedMatrix`] by `1/sqrt(D)`.
#[derive(Debug, Clone)]
pub struct NormalizedMatrix {
    values: DMatrix<f64>,
    meter_ids: Vec<String>,
}

/// One quarantined ingestion row.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct QuarantineEntry {
    pub meter_id: String,
    pub reason: String,
}

/// Result of [`load_profiles`]: the clean rows plus the quarantine report.
#[derive(Debug, Clone)]
pub struct LoadedProfiles {
    pub profiles: ProfileMatrix,
    pub quarantine: Vec<QuarantineEntry>,
}

impl ProfileMatrix {
    /// Build a profile matrix, validating shape and finiteness.
    pub fn new(values: DMatrix<f64>, meter_ids: Vec<String>, resolution_minutes: u32) -> Result<Self> {
        let (m, d) = (values.nrows(), values.ncols());
        if m < 2 || d < 2 {
            return Err(Error::InsufficientData { need: 2, got: m.min(d) });
        }
        if meter_ids.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "{} meter ids for {} rows",
                meter_ids.len(),
                m
            )));
        }
        if resolution_minutes as usize * d != MINUTES_PER_DAY as usize {
            return Err(Error::BadResolution { resolution_minutes, steps: d });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            let row = bad % m; // column-major storage
            return Err(Error::DegenerateRow {
                meter_id: meter_ids[row].clone(),
                reason: "non-finite entry".into(),
            });
        }
        Ok(Self { values, meter_ids, resolution_minutes })
    }

    /// Build from values alone, deriving the resolution from the column count.
    pub fn from_values(values: DMatrix<f64>, meter_ids: Vec<String>) -> Result<Self> {
        let d = values.ncols();
        if d == 0 || MINUTES_PER_DAY as usize % d != 0 {
            return Err(Error::BadResolution { resolution_minutes: 0, steps: d });
        }
        let resolution = MINUTES_PER_DAY / d as u32;
        Self::new(values, meter_ids, resolution)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn meter_ids(&self) -> &[String] {
        &self.meter_ids
    }

    pub fn resolution_minutes(&self) -> u32 {
        self.resolution_minutes
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

impl StandardizedMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn meter_ids(&self) -> &[String] {
        &self.meter_ids
    }
}

impl NormalizedMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn meter_ids(&self) -> &[String] {
        &self.meter_ids
    }

    /// Wrap an already unit-norm matrix, checking the row-norm invariant.
    pub fn from_unit_rows(values: DMatrix<f64>, meter_ids: Vec<String>) -> Result<Self> {
        for i in 0..values.nrows() {
            let norm = values.row(i).norm();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has norm {norm}, expected 1"
                )));
            }
        }
        Ok(Self { values, meter_ids })
    }
}

/// Load a CSV of daily profiles. Header: `meter_id,t001,...,tD`.
///
/// Rows containing non-finite or unparseable readings are quarantined with a
/// reason, never silently dropped.
pub fn load_profiles(path: &Path) -> Result<LoadedProfiles> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;

    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.len() < 3 {
        return Err(Error::CsvParse {
            line: 1,
            message: "header must name a meter id column and at least 2 time steps".into(),
        });
    }
    let d = headers.len() - 1;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut ids: Vec<String> = Vec::new();
    let mut quarantine: Vec<QuarantineEntry> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != d + 1 {
            return Err(Error::InconsistentColumns { line, expected: d + 1, got: record.len() });
        }
        let meter_id = record[0].to_string();
        let mut row = Vec::with_capacity(d);
        let mut bad: Option<String> = None;
        for (j, field) in record.iter().skip(1).enumerate() {
            match field.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => row.push(v),
                Ok(_) => {
                    bad = Some(format!("non-finite value at column {}", j + 1));
                    break;
                }
                Err(_) => {
                    bad = Some(format!("unparseable value {:?} at column {}", field, j + 1));
                    break;
                }
            }
        }
        match bad {
            Some(reason) => quarantine.push(QuarantineEntry { meter_id, reason }),
            None => {
                ids.push(meter_id);
                rows.push(row);
            }
        }
    }

    if rows.len() < 2 {
        return Err(Error::InsufficientData { need: 2, got: rows.len() });
    }
    let values = DMatrix::from_row_iterator(rows.len(), d, rows.iter().flatten().copied());
    let profiles = ProfileMatrix::from_values(values, ids)?;
    Ok(LoadedProfiles { profiles, quarantine })
}

fn csv_err(e: csv::Error) -> Error {
    let line = match e.kind() {
        csv::ErrorKind::Utf8 { pos, .. } => pos.as_ref().map(|p| p.line()).unwrap_or(0),
        _ => e.position().map(|p| p.line()).unwrap_or(0),
    };
    Error::CsvParse { line, message: e.to_string() }
}

/// Standardize one row: subtract the row mean and divide by the population
/// standard deviation (divisor D).
pub fn standardize_row(row: &[f64]) -> std::result::Result<Vec<f64>, String> {
    let d = row.len() as f64;
    let mean = row.iter().sum::<f64>() / d;
    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
    let sigma = var.sqrt();
    if sigma <= EPS_VAR {
        return Err("constant profile (zero variance)".into());
    }
    Ok(row.iter().map(|v| (v - mean) / sigma).collect())
}

/// Row-standardize the whole matrix. Fails on the first constant row.
pub fn standardize(p: &ProfileMatrix) -> Result<StandardizedMatrix> {
    let m = p.nrows();
    let d = p.ncols();
    let results = map_indices(m, |i| {
        let row: Vec<f64> = p.values.row(i).iter().copied().collect();
        standardize_row(&row)
    });
    let mut values = DMatrix::zeros(m, d);
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(row) => {
                for (j, v) in row.into_iter().enumerate() {
                    values[(i, j)] = v;
                }
            }
            Err(reason) => {
                return Err(Error::DegenerateRow {
                    meter_id: p.meter_ids[i].clone(),
                    reason,
                })
            }
        }
    }
    Ok(StandardizedMatrix { values, meter_ids: p.meter_ids.clone() })
}

/// Scale a standardized matrix by `1/sqrt(D)` so every row has unit norm.
pub fn normalize(s: &StandardizedMatrix) -> NormalizedMatrix {
    let scale = 1.0 / (s.values.ncols() as f64).sqrt();
    NormalizedMatrix {
        values: &s.values * scale,
        meter_ids: s.meter_ids.clone(),
    }
}
