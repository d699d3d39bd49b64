use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, gather, BlockedSplit, GbtModel, Hyperparams, Metrics};
use crate::error::{Error, Result};
use crate::seed::{derive_indexed, rng_indexed};
use crate::timeseries::FeatureFrame;

/// Inclusive bounds of the random search. The learning rate is drawn
/// log-uniformly, everything else uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_trees: (usize, usize),
    pub max_depth: (usize, usize),
    pub learning_rate: (f64, f64),
    pub min_samples_leaf: (usize, usize),
    pub row_subsample: (f64, f64),
    pub feature_subsample: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_trees: (100, 1000),
            max_depth: (3, 8),
            learning_rate: (0.01, 0.3),
            min_samples_leaf: (5, 50),
            row_subsample: (1.0, 1.0),
            feature_subsample: (1.0, 1.0),
        }
    }
}

impl SearchSpace {
    /// The space holding only `hp`.
    pub fn point(hp: &Hyperparams) -> Self {
        Self {
            n_trees: (hp.n_trees, hp.n_trees),
            max_depth: (hp.max_depth, hp.max_depth),
            learning_rate: (hp.learning_rate, hp.learning_rate),
            min_samples_leaf: (hp.min_samples_leaf, hp.min_samples_leaf),
            row_subsample: (hp.row_subsample, hp.row_subsample),
            feature_subsample: (hp.feature_subsample, hp.feature_subsample),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str| Err(Error::invalid(format!("search range for {name} is empty")));
        if self.n_trees.0 > self.n_trees.1 {
            return empty("n_trees");
        }
        if self.max_depth.0 > self.max_depth.1 || self.max_depth.0 == 0 {
            return empty("max_depth");
        }
        if !(self.learning_rate.0 > 0.0 && self.learning_rate.0 <= self.learning_rate.1 && self.learning_rate.1 <= 1.0) {
            return empty("learning_rate");
        }
        if self.min_samples_leaf.0 > self.min_samples_leaf.1 || self.min_samples_leaf.0 == 0 {
            return empty("min_samples_leaf");
        }
        for (name, (lo, hi)) in [("row_subsample", self.row_subsample), ("feature_subsample", self.feature_subsample)] {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return empty(name);
            }
        }
        Ok(())
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Hyperparams {
        let (llo, lhi) = (self.learning_rate.0.ln(), self.learning_rate.1.ln());
        let uniform = |rng: &mut R, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        Hyperparams {
            n_trees: rng.random_range(self.n_trees.0..=self.n_trees.1),
            max_depth: rng.random_range(self.max_depth.0..=self.max_depth.1),
            learning_rate: if llo == lhi {
                self.learning_rate.0
            } else {
                rng.random_range(llo..=lhi).exp().clamp(self.learning_rate.0, self.learning_rate.1)
            },
            min_samples_leaf: rng.random_range(self.min_samples_leaf.0..=self.min_samples_leaf.1),
            row_subsample: uniform(rng, self.row_subsample),
            feature_subsample: uniform(rng, self.feature_subsample),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub hyperparams: Hyperparams,
    pub train_seed: u64,
    pub test: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_index: usize,
    pub best: Hyperparams,
    pub trials: Vec<Trial>,
    pub model: GbtModel,
}

impl SearchResult {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best_index]
    }
}

/// Draws `k` hyperparameter sets, trains each on the split's training rows
/// and keeps the one with the highest test R². Trial `i` depends only on
/// `(seed, i)`, so a longer search contains every shorter one.
pub fn random_search(
    space: &SearchSpace,
    k: usize,
    frame: &FeatureFrame,
    features: &[&str],
    target: &str,
    split: &BlockedSplit,
    seed: u64,
) -> Result<SearchResult> {
    space.validate()?;
    if k == 0 {
        return Err(Error::invalid("random search needs at least one trial"));
    }
    if split.test.is_empty() || split.train.is_empty() {
        return Err(Error::invalid("random search needs non-empty train and test sets"));
    }
    let (names, columns) = gather(frame, features, &split.train)?;
    let all_y = frame.values(target)?;
    let y: Vec<f64> = split.train.iter().map(|&r| all_y[r]).collect();

    let trials = (0..k)
        .into_par_iter()
        .map(|i| {
            let hyperparams = space.draw(&mut rng_indexed(seed, "gbt/trial-hyperparams", i as u64));
            let train_seed = derive_indexed(seed, "gbt/trial-train", i as u64);
            let model = GbtModel::train_columns(&names, &columns, target, &y, &hyperparams, train_seed)?;
            let test = evaluate(&model, frame, &split.test)?;
            Ok(Trial { index: i, hyperparams, train_seed, test })
        })
        .collect::<Result<Vec<_>>>()?;

    let score = |t: &Trial| if t.test.r2.is_nan() { f64::NEG_INFINITY } else { t.test.r2 };
    let best_index = trials
        .iter()
        .fold(0, |b, t| if score(t) > score(&trials[b]) { t.index } else { b });
    let best = trials[best_index].clone();
    let model = GbtModel::train_columns(&names, &columns, target, &y, &best.hyperparams, best.train_seed)?;
    Ok(SearchResult { best_index, best: best.hyperparams, trials, model })
}
