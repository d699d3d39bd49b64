//! Causal modelling of hourly electricity market data: linear structural
//! causal models, graph falsification, stratified regressions, gradient
//! boosted trees and Shapley-flow attributions.

pub mod error;
pub mod falsify;
pub mod gbt;
pub mod graph;
pub mod json;
pub mod scm;
pub mod seed;
pub mod shapflow;
pub mod stratify;
pub mod synthgen;
pub mod timeseries;

pub use error::{Error, Result};
pub use gbt::{GbtModel, Hyperparams};
pub use graph::{CausalGraph, DirectedPath, LmcTriple};
pub use shapflow::{EdgeAttribution, FlowGraph};
pub use synthgen::{GroundTruth, SyntheticSpec};
pub use scm::{EffectReport, FitReport, LinearScm};
pub use timeseries::{FeatureFrame, NormalizationStats, TimeSeries};
