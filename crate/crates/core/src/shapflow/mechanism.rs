use std::fmt;
use std::sync::Arc;

use crate::gbt::GbtModel;

/// Deterministic map from a node's parent values to its value.
pub trait Mechanism: Send + Sync {
    fn eval(&self, inputs: &[f64]) -> f64;

    /// Expected input count, when the mechanism knows it.
    fn n_inputs(&self) -> Option<usize> {
        None
    }
}

impl Mechanism for GbtModel {
    fn eval(&self, inputs: &[f64]) -> f64 {
        self.predict_unchecked(inputs)
    }

    fn n_inputs(&self) -> Option<usize> {
        Some(self.n_features())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearMechanism {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl Mechanism for LinearMechanism {
    fn eval(&self, inputs: &[f64]) -> f64 {
        self.intercept + self.slopes.iter().zip(inputs).map(|(s, x)| s * x).sum::<f64>()
    }

    fn n_inputs(&self) -> Option<usize> {
        Some(self.slopes.len())
    }
}

/// Wraps a closure.
pub struct FnMechanism<F>(pub F);

impl<F> fmt::Debug for FnMechanism<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FnMechanism")
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Mechanism for FnMechanism<F> {
    fn eval(&self, inputs: &[f64]) -> f64 {
        (self.0)(inputs)
    }
}

/// Feeds `inner` with `inputs[map[k]]` as its k-th argument.
pub struct Reordered {
    inner: Arc<dyn Mechanism>,
    map: Vec<usize>,
    n_inputs: usize,
}

impl Reordered {
    pub fn new(inner: Arc<dyn Mechanism>, map: Vec<usize>, n_inputs: usize) -> Self {
        Self { inner, map, n_inputs }
    }
}

impl Mechanism for Reordered {
    fn eval(&self, inputs: &[f64]) -> f64 {
        let args: Vec<f64> = self.map.iter().map(|&k| inputs[k]).collect();
        self.inner.eval(&args)
    }

    fn n_inputs(&self) -> Option<usize> {
        Some(self.n_inputs)
    }
}
