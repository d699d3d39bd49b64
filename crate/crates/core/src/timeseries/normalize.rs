use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::FeatureFrame;
use crate::error::{Error, Result};

/// Mean and population standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

impl ColumnStats {
    /// Two-pass mean and population (ddof 0) standard deviation.
    pub fn of(name: &str, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Degenerate(format!("column `{name}` is empty")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "column `{name}` has missing or non-finite values"
            )));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        let first = values[0];
        if std == 0.0 || values.iter().all(|&v| v == first) {
            return Err(Error::DegenerateColumn(name.to_string()));
        }
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// Per-column statistics keyed by column name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub columns: BTreeMap<String, ColumnStats>,
}

impl NormalizationStats {
    pub fn from_frame(frame: &FeatureFrame) -> Result<Self> {
        let mut columns = BTreeMap::new();
        for col in frame.columns() {
            columns.insert(col.name.clone(), ColumnStats::of(&col.name, &col.values)?);
        }
        Ok(Self { columns })
    }

    pub fn get(&self, name: &str) -> Result<&ColumnStats> {
        self.columns
            .get(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    pub fn mean(&self, name: &str) -> Result<f64> {
        Ok(self.get(name)?.mean)
    }

    pub fn std(&self, name: &str) -> Result<f64> {
        Ok(self.get(name)?.std)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }
}

/// Centers and scales every column to mean 0 and std 1.
pub fn normalize(frame: &FeatureFrame) -> Result<(FeatureFrame, NormalizationStats)> {
    let stats = NormalizationStats::from_frame(frame)?;
    let mut out = FeatureFrame::new(frame.timestamps().to_vec());
    for col in frame.columns() {
        let s = stats.columns[&col.name];
        let values = col.values.iter().map(|&v| s.normalize(v)).collect();
        out.push_column(col.name.clone(), col.unit.clone(), values)?;
    }
    Ok((out, stats))
}

/// Maps normalized columns back to raw units. Columns without statistics are rejected.
pub fn denormalize(frame: &FeatureFrame, stats: &NormalizationStats) -> Result<FeatureFrame> {
    let mut out = FeatureFrame::new(frame.timestamps().to_vec());
    for col in frame.columns() {
        let s = stats.get(&col.name)?;
        let values = col.values.iter().map(|&v| s.denormalize(v)).collect();
        out.push_column(col.name.clone(), col.unit.clone(), values)?;
    }
    Ok(out)
}

/// Raw-unit coefficient of parent `j` in the equation of `i`: `c_norm * std_i / std_j`.
pub fn denormalize_coeff(c_norm: f64, stats: &NormalizationStats, i: &str, j: &str) -> Result<f64> {
    Ok(c_norm * stats.std(i)? / stats.std(j)?)
}
