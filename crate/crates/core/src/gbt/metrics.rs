use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::GbtModel;
use crate::error::{Error, Result};
use crate::timeseries::FeatureFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Not a number when the labels are constant.
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
    pub mean_label: f64,
    pub n: usize,
}

pub fn metrics(labels: &[f64], predictions: &[f64]) -> Result<Metrics> {
    if labels.len() != predictions.len() {
        return Err(Error::invalid("labels and predictions differ in length"));
    }
    if labels.is_empty() {
        return Err(Error::Degenerate("no rows to evaluate".into()));
    }
    let n = labels.len() as f64;
    let mean_label = labels.iter().sum::<f64>() / n;
    let (mut abs, mut sq, mut tss) = (0.0, 0.0, 0.0);
    for (y, p) in labels.iter().zip(predictions) {
        abs += (y - p).abs();
        sq += (y - p).powi(2);
        tss += (y - mean_label).powi(2);
    }
    Ok(Metrics {
        r2: if tss > 0.0 { 1.0 - sq / tss } else { f64::NAN },
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        mean_label,
        n: labels.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Period {
    Before,
    During,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodMetrics {
    pub period: Period,
    /// Absent when the period holds no rows.
    pub metrics: Option<Metrics>,
}

/// Metrics of `model` on the given rows of `frame`.
pub fn evaluate(model: &GbtModel, frame: &FeatureFrame, rows: &[usize]) -> Result<Metrics> {
    let all = frame.values(&model.target)?;
    let labels: Vec<f64> = rows.iter().map(|&r| all[r]).collect();
    let predictions = model.predict_frame(frame, Some(rows))?;
    metrics(&labels, &predictions)
}

/// Metrics before the split, from the split on, and over all given rows.
pub fn evaluate_periods(
    model: &GbtModel,
    frame: &FeatureFrame,
    rows: &[usize],
    split: DateTime<Utc>,
) -> Result<Vec<PeriodMetrics>> {
    let ts = frame.timestamps();
    let (before, during): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| ts[r] < split);
    [(Period::Before, before), (Period::During, during), (Period::Full, rows.to_vec())]
        .into_iter()
        .map(|(period, rs)| {
            let metrics = if rs.is_empty() { None } else { Some(evaluate(model, frame, &rs)?) };
            Ok(PeriodMetrics { period, metrics })
        })
        .collect()
}
