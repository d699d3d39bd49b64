use std::collections::HashMap;

use chrono::{DateTime, Utc};

use super::HOUR_SECONDS;
use crate::error::{Error, Result};

/// A single named series with its own time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub name: String,
    pub unit: String,
    pub timestamps: Vec<DateTime<Utc>>,
    /// `NaN` marks a missing value.
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        timestamps: Vec<DateTime<Utc>>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if timestamps.len() != values.len() {
            return Err(Error::Schema(format!(
                "series `{name}` has {} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        Ok(Self {
            name,
            unit: unit.into(),
            timestamps,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub values: Vec<f64>,
}

/// Columns sharing one timestamp axis.
#[derive(Debug, Clone, Default)]
pub struct FeatureFrame {
    timestamps: Vec<DateTime<Utc>>,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
}

impl PartialEq for FeatureFrame {
    fn eq(&self, other: &Self) -> bool {
        self.timestamps == other.timestamps && self.columns == other.columns
    }
}

impl FeatureFrame {
    pub fn new(timestamps: Vec<DateTime<Utc>>) -> Self {
        Self {
            timestamps,
            columns: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.timestamps.len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn timestamps(&self) -> &[DateTime<Utc>] {
        &self.timestamps
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.index
            .get(name)
            .map(|&i| &self.columns[i])
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    }

    pub fn values(&self, name: &str) -> Result<&[f64]> {
        self.column(name).map(|c| c.values.as_slice())
    }

    pub fn unit(&self, name: &str) -> Result<&str> {
        self.column(name).map(|c| c.unit.as_str())
    }

    pub fn push_column(
        &mut self,
        name: impl Into<String>,
        unit: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<()> {
        let name = name.into();
        if values.len() != self.n_rows() {
            return Err(Error::Schema(format!(
                "column `{name}` has {} values, frame has {} rows",
                values.len(),
                self.n_rows()
            )));
        }
        if self.index.contains_key(&name) {
            return Err(Error::Schema(format!("duplicate column `{name}`")));
        }
        self.index.insert(name.clone(), self.columns.len());
        self.columns.push(Column {
            name,
            unit: unit.into(),
            values,
        });
        Ok(())
    }

    /// Replaces the values of an existing column or appends a new one.
    pub fn set_column(&mut self, name: &str, unit: &str, values: Vec<f64>) -> Result<()> {
        match self.index.get(name) {
            Some(&i) => {
                if values.len() != self.n_rows() {
                    return Err(Error::Schema(format!("column `{name}` length mismatch")));
                }
                self.columns[i].values = values;
                self.columns[i].unit = unit.to_string();
                Ok(())
            }
            None => self.push_column(name, unit, values),
        }
    }

    pub fn series(&self, name: &str) -> Result<TimeSeries> {
        let col = self.column(name)?;
        TimeSeries::new(
            col.name.clone(),
            col.unit.clone(),
            self.timestamps.clone(),
            col.values.clone(),
        )
    }

    /// Puts a series onto this frame's axis. The series must share the axis exactly.
    pub fn set_series(&mut self, series: &TimeSeries) -> Result<()> {
        if series.timestamps != self.timestamps {
            return Err(Error::Schema(format!(
                "series `{}` does not share the frame's timestamp axis",
                series.name
            )));
        }
        self.set_column(&series.name, &series.unit, series.values.clone())
    }

    /// Keeps the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<FeatureFrame> {
        let mut out = FeatureFrame::new(self.timestamps.clone());
        for name in names {
            let col = self.column(name)?;
            out.push_column(col.name.clone(), col.unit.clone(), col.values.clone())?;
        }
        Ok(out)
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureFrame {
        let mut out = FeatureFrame::new(rows.iter().map(|&r| self.timestamps[r]).collect());
        for col in &self.columns {
            let values = rows.iter().map(|&r| col.values[r]).collect();
            out.push_column(col.name.clone(), col.unit.clone(), values)
                .expect("row selection keeps names unique");
        }
        out
    }

    pub fn row(&self, row: usize, names: &[&str]) -> Result<Vec<f64>> {
        names
            .iter()
            .map(|n| self.values(n).map(|v| v[row]))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.columns
            .iter()
            .all(|c| c.values.iter().all(|v| v.is_finite()))
    }

    pub fn is_hourly_regular(&self) -> bool {
        self.timestamps
            .windows(2)
            .all(|w| (w[1] - w[0]).num_seconds() == HOUR_SECONDS)
    }

    /// Reindexes onto a gap-free hourly axis from the first to the last
    /// timestamp. Inserted hours are missing in every column.
    pub fn align_hourly(&self) -> Result<FeatureFrame> {
        if self.timestamps.is_empty() {
            return Ok(self.clone());
        }
        for (i, t) in self.timestamps.iter().enumerate() {
            if t.timestamp() % HOUR_SECONDS != 0 {
                return Err(Error::Format {
                    row: i + 2,
                    message: format!("timestamp {t} is not on the hour"),
                });
            }
            if i > 0 && *t <= self.timestamps[i - 1] {
                return Err(Error::Format {
                    row: i + 2,
                    message: "timestamps are not strictly increasing".into(),
                });
            }
        }
        let start = self.timestamps[0];
        let span = (*self.timestamps.last().unwrap() - start).num_seconds() / HOUR_SECONDS;
        let n = span as usize + 1;
        let axis = super::hourly_axis(start, n);
        let slots: Vec<usize> = self
            .timestamps
            .iter()
            .map(|t| ((*t - start).num_seconds() / HOUR_SECONDS) as usize)
            .collect();
        let mut out = FeatureFrame::new(axis);
        for col in &self.columns {
            let mut values = vec![f64::NAN; n];
            for (&slot, &v) in slots.iter().zip(&col.values) {
                values[slot] = v;
            }
            out.push_column(col.name.clone(), col.unit.clone(), values)?;
        }
        Ok(out)
    }

    /// Aligns hourly and interpolates every column: the cleaning pipeline.
    pub fn clean(&self) -> Result<FeatureFrame> {
        let mut out = self.align_hourly()?;
        for i in 0..out.columns.len() {
            if out.columns[i].values.iter().any(|v| v.is_nan()) {
                let series = out.series(&out.columns[i].name.clone())?;
                let filled = super::interpolate_missing(&series)?;
                out.columns[i].values = filled.values;
            }
        }
        Ok(out)
    }

    /// Row indices with timestamp strictly before `split`, and at or after it.
    pub fn split_at(&self, split: DateTime<Utc>) -> (Vec<usize>, Vec<usize>) {
        (0..self.n_rows()).partition(|&r| self.timestamps[r] < split)
    }
}
