//! Gradient-boosted regression trees with squared-error loss.
//!
//! Trees are grown level by level with exact greedy splits over presorted
//! feature values. `x <= threshold` goes left.

mod metrics;
mod search;
mod split;
mod tree;

pub use metrics::{evaluate, evaluate_periods, metrics, Metrics, Period, PeriodMetrics};
pub use search::{random_search, SearchResult, SearchSpace, Trial};
pub use split::{blocked_split, BlockedSplit, DEFAULT_BLOCK_HOURS, DEFAULT_TEST_FRAC};
pub use tree::{RegressionTree, TreeNode};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::timeseries::FeatureFrame;
use tree::{grow_tree, TrainData, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub row_subsample: f64,
    pub feature_subsample: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 300,
            max_depth: 5,
            learning_rate: 0.05,
            min_samples_leaf: 10,
            row_subsample: 1.0,
            feature_subsample: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let frac = |v: f64| v > 0.0 && v <= 1.0;
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if !frac(self.learning_rate) {
            return Err(Error::invalid("learning_rate must lie in (0, 1]"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if !frac(self.row_subsample) || !frac(self.feature_subsample) {
            return Err(Error::invalid("subsample fractions must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub features: Vec<String>,
    pub target: String,
    pub base_score: f64,
    pub learning_rate: f64,
    pub hyperparams: Hyperparams,
    pub trees: Vec<RegressionTree>,
    /// Set when the target was constant and only the base score is used.
    pub degenerate: bool,
    /// Training residual sum of squares after the base score and after each tree.
    pub train_loss: Vec<f64>,
}

fn rss(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum()
}

impl GbtModel {
    /// Trains on column-major features.
    pub fn train_columns(
        feature_names: &[String],
        columns: &[Vec<f64>],
        target_name: &str,
        y: &[f64],
        hp: &Hyperparams,
        seed: u64,
    ) -> Result<GbtModel> {
        hp.validate()?;
        if columns.len() != feature_names.len() || columns.is_empty() {
            return Err(Error::invalid("need at least one feature with a name for each column"));
        }
        let n = y.len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("feature columns and target differ in length"));
        }
        if n < 2 * hp.min_samples_leaf || n < 2 {
            return Err(Error::Degenerate(format!(
                "{n} rows are too few for min_samples_leaf = {}",
                hp.min_samples_leaf
            )));
        }
        let finite = |v: &f64| v.is_finite();
        if !y.iter().all(finite) || !columns.iter().all(|c| c.iter().all(finite)) {
            return Err(Error::Degenerate("training data has missing or non-finite values".into()));
        }
        let base = y.iter().sum::<f64>() / n as f64;
        let mut model = GbtModel {
            features: feature_names.to_vec(),
            target: target_name.to_string(),
            base_score: base,
            learning_rate: hp.learning_rate,
            hyperparams: *hp,
            trees: Vec::new(),
            degenerate: false,
            train_loss: Vec::new(),
        };
        if y.iter().all(|&v| v == y[0]) {
            model.base_score = y[0];
            model.degenerate = true;
            model.train_loss.push(0.0);
            return Ok(model);
        }

        let data = TrainData::new(columns);
        let params = TreeParams {
            max_depth: hp.max_depth,
            min_samples_leaf: hp.min_samples_leaf,
            row_subsample: hp.row_subsample,
            feature_subsample: hp.feature_subsample,
        };
        let mut rng = rng_for(seed, "gbt/subsample");
        let mut f = vec![base; n];
        let mut residual: Vec<f64> = y.iter().map(|v| v - base).collect();
        model.train_loss.push(rss(y, &f));
        for _ in 0..hp.n_trees {
            let tree = grow_tree(&data, &residual, &params, &mut rng);
            for r in 0..n {
                f[r] += hp.learning_rate * tree.predict_at(columns, r);
                residual[r] = y[r] - f[r];
            }
            model.train_loss.push(rss(y, &f));
            model.trees.push(tree);
        }
        Ok(model)
    }

    /// Trains on the given rows of `frame`.
    pub fn train(
        frame: &FeatureFrame,
        features: &[&str],
        target: &str,
        rows: &[usize],
        hp: &Hyperparams,
        seed: u64,
    ) -> Result<GbtModel> {
        let (names, columns) = gather(frame, features, rows)?;
        let all = frame.values(target)?;
        let y: Vec<f64> = rows.iter().map(|&r| all[r]).collect();
        Self::train_columns(&names, &columns, target, &y, hp, seed)
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Prediction for one row ordered like `features`.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.features.len() {
            return Err(Error::invalid(format!(
                "model expects {} features, got {}",
                self.features.len(),
                row.len()
            )));
        }
        Ok(self.predict_unchecked(row))
    }

    pub(crate) fn predict_unchecked(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Predictions for the given rows (all rows when `rows` is `None`).
    pub fn predict_frame(&self, frame: &FeatureFrame, rows: Option<&[usize]>) -> Result<Vec<f64>> {
        let cols: Vec<&[f64]> = self
            .features
            .iter()
            .map(|f| frame.values(f))
            .collect::<Result<_>>()?;
        let all: Vec<usize>;
        let rows = match rows {
            Some(r) => r,
            None => {
                all = (0..frame.n_rows()).collect();
                &all
            }
        };
        let mut row = vec![0.0; cols.len()];
        Ok(rows
            .iter()
            .map(|&r| {
                for (slot, c) in row.iter_mut().zip(&cols) {
                    *slot = c[r];
                }
                self.predict_unchecked(&row)
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<GbtModel> {
        crate::json::from_str(text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::json::write_file(path, self)
    }

    pub fn load(path: &Path) -> Result<GbtModel> {
        crate::json::read_file(path)
    }
}

pub(crate) fn gather(
    frame: &FeatureFrame,
    features: &[&str],
    rows: &[usize],
) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut names = Vec::with_capacity(features.len());
    let mut columns = Vec::with_capacity(features.len());
    for f in features {
        let v = frame.values(f)?;
        names.push(f.to_string());
        columns.push(rows.iter().map(|&r| v[r]).collect());
    }
    Ok((names, columns))
}

#[cfg(test)]
mod tests;
