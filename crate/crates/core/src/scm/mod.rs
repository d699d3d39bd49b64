//! Linear structural causal model fitted in normalized space.
//!
//! Each non-root node `i` follows `x_i = sum_j c_ij x_j + u_i` over its graph
//! parents, with all variables standardized. Roots keep their empirical
//! (normalized) sample and are resampled when generating data.

mod effects;
mod sample;

pub use effects::{
    crisis_impacts, regression_slope, CrisisImpact, EffectReport, PathContribution,
    RegressionComparison, DEFAULT_CRISIS_SPLIT,
};

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::timeseries::{ColumnStats, FeatureFrame, NormalizationStats};

/// Gram matrices with a condition number above this raise a warning.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub enum NodeModel {
    /// Normalized empirical sample.
    Root { samples: Vec<f64> },
    /// Normalized coefficients aligned with the graph's parent order.
    Linear { coefficients: Vec<f64>, noise_std: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearScm {
    graph: CausalGraph,
    models: Vec<NodeModel>,
    stats: NormalizationStats,
    units: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFit {
    pub node: String,
    pub n_parents: usize,
    /// Absent for roots.
    pub r2: Option<f64>,
    /// Residual standard deviation in normalized units; absent for roots.
    pub residual_std: Option<f64>,
    pub condition_number: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub n_rows: usize,
    /// One entry per node in topological order.
    pub nodes: Vec<NodeFit>,
    pub warnings: Vec<String>,
}

impl FitReport {
    pub fn node(&self, name: &str) -> Option<&NodeFit> {
        self.nodes.iter().find(|n| n.node == name)
    }

    pub fn r2(&self, name: &str) -> Option<f64> {
        self.node(name).and_then(|n| n.r2)
    }
}

/// `1 - RSS/TSS`.
pub fn r2(observed: &[f64], predicted: &[f64]) -> Result<f64> {
    if observed.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "r2 needs equal lengths, got {} and {}",
            observed.len(),
            predicted.len()
        )));
    }
    if observed.len() < 2 {
        return Err(Error::invalid("r2 needs at least two observations"));
    }
    let mean = observed.iter().sum::<f64>() / observed.len() as f64;
    let tss: f64 = observed.iter().map(|o| (o - mean).powi(2)).sum();
    if tss == 0.0 {
        return Err(Error::Degenerate("r2 of a constant series is undefined".into()));
    }
    let rss: f64 = observed
        .iter()
        .zip(predicted)
        .map(|(o, p)| (o - p).powi(2))
        .sum();
    Ok(1.0 - rss / tss)
}

struct Solved {
    coefficients: Vec<f64>,
    condition: f64,
}

/// Solves `G c = b` for a symmetric positive semidefinite Gram matrix,
/// rejecting exact rank deficiency.
fn solve_gram(node: &str, gram: DMatrix<f64>, rhs: DVector<f64>) -> Result<Solved> {
    let p = gram.nrows();
    let eig = SymmetricEigen::new(gram.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmax > 0.0) || lmin <= lmax * f64::EPSILON * (p as f64) * 16.0 {
        return Err(Error::SingularFit(node.to_string()));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::SingularFit(node.to_string()))?;
    let c = chol.solve(&rhs);
    Ok(Solved {
        coefficients: c.iter().copied().collect(),
        condition: lmax / lmin,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl LinearScm {
    /// Ordinary least squares per node, without intercept, on the
    /// standardized columns named after the graph nodes.
    pub fn fit(graph: &CausalGraph, frame: &FeatureFrame) -> Result<(LinearScm, FitReport)> {
        let n = frame.n_rows();
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(graph.n_nodes());
        let mut stats = NormalizationStats::default();
        let mut units = BTreeMap::new();
        for name in graph.nodes() {
            let col = frame.column(name).map_err(|_| {
                Error::Schema(format!("graph node `{name}` has no matching data column"))
            })?;
            let s = ColumnStats::of(name, &col.values)?;
            columns.push(col.values.iter().map(|&v| s.normalize(v)).collect());
            stats.columns.insert(name.clone(), s);
            units.insert(name.clone(), col.unit.clone());
        }
        if n < 2 {
            return Err(Error::Degenerate("fitting needs at least two rows".into()));
        }

        let fits: Vec<(NodeModel, NodeFit)> = (0..graph.n_nodes())
            .into_par_iter()
            .map(|i| fit_node(graph, &columns, i))
            .collect::<Result<_>>()?;

        let mut models = Vec::with_capacity(fits.len());
        let mut by_node = Vec::with_capacity(fits.len());
        for (m, f) in fits {
            models.push(m);
            by_node.push(f);
        }
        let mut warnings = Vec::new();
        let nodes: Vec<NodeFit> = graph
            .topological_order()
            .iter()
            .map(|&i| by_node[i].clone())
            .collect();
        for nf in &nodes {
            if let Some(c) = nf.condition_number.filter(|&c| c > CONDITION_WARNING) {
                warnings.push(format!(
                    "near-collinear parents of `{}`: condition number {c:.3e}",
                    nf.node
                ));
            }
        }
        let scm = LinearScm {
            graph: graph.clone(),
            models,
            stats,
            units,
        };
        Ok((scm, FitReport { n_rows: n, nodes, warnings }))
    }

    /// Builds a model from known normalized coefficients, e.g. a ground
    /// truth. `coefficients[child][parent]` must cover exactly the graph
    /// parents of every non-root; roots need a non-empty normalized sample.
    pub fn from_parts(
        graph: CausalGraph,
        coefficients: &BTreeMap<String, BTreeMap<String, f64>>,
        noise_std: &BTreeMap<String, f64>,
        root_samples: &BTreeMap<String, Vec<f64>>,
        stats: NormalizationStats,
        units: BTreeMap<String, String>,
    ) -> Result<LinearScm> {
        let mut models = Vec::with_capacity(graph.n_nodes());
        for (i, name) in graph.nodes().iter().enumerate() {
            stats.get(name)?;
            let parents = graph.parent_indices(i);
            if parents.is_empty() {
                let samples = root_samples
                    .get(name)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| Error::invalid(format!("root `{name}` needs a sample")))?;
                models.push(NodeModel::Root { samples: samples.clone() });
                continue;
            }
            let given = coefficients
                .get(name)
                .ok_or_else(|| Error::invalid(format!("no coefficients for `{name}`")))?;
            if given.len() != parents.len() {
                return Err(Error::invalid(format!(
                    "coefficients of `{name}` must match its {} parents exactly",
                    parents.len()
                )));
            }
            let coefficients = parents
                .iter()
                .map(|&p| {
                    let pn = graph.name(p);
                    given.get(pn).copied().ok_or_else(|| Error::MissingEdge {
                        from: pn.to_string(),
                        to: name.clone(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let noise_std = noise_std.get(name).copied().unwrap_or(0.0);
            if !(noise_std >= 0.0) {
                return Err(Error::invalid(format!("noise std of `{name}` must be >= 0")));
            }
            models.push(NodeModel::Linear { coefficients, noise_std });
        }
        Ok(LinearScm { graph, models, stats, units })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn stats(&self) -> &NormalizationStats {
        &self.stats
    }

    pub fn model(&self, node: &str) -> Result<&NodeModel> {
        Ok(&self.models[self.graph.index_of(node)?])
    }

    pub fn unit(&self, node: &str) -> &str {
        self.units.get(node).map_or("", String::as_str)
    }

    /// Normalized coefficient of edge `from -> to`.
    pub fn coefficient_normalized(&self, from: &str, to: &str) -> Result<f64> {
        let i = self.graph.index_of(to)?;
        let j = self.graph.index_of(from)?;
        let missing = || Error::MissingEdge {
            from: from.to_string(),
            to: to.to_string(),
        };
        let pos = self
            .graph
            .parent_indices(i)
            .iter()
            .position(|&p| p == j)
            .ok_or_else(missing)?;
        match &self.models[i] {
            NodeModel::Linear { coefficients, .. } => Ok(coefficients[pos]),
            NodeModel::Root { .. } => Err(missing()),
        }
    }

    /// Raw-unit coefficient of edge `from -> to`.
    pub fn coefficient(&self, from: &str, to: &str) -> Result<f64> {
        let c = self.coefficient_normalized(from, to)?;
        crate::timeseries::denormalize_coeff(c, &self.stats, to, from)
    }

    /// All normalized coefficients as `child -> parent -> c`.
    pub fn coefficients_normalized(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut out = BTreeMap::new();
        for (i, m) in self.models.iter().enumerate() {
            if let NodeModel::Linear { coefficients, .. } = m {
                let row = self
                    .graph
                    .parent_indices(i)
                    .iter()
                    .zip(coefficients)
                    .map(|(&p, &c)| (self.graph.name(p).to_string(), c))
                    .collect();
                out.insert(self.graph.name(i).to_string(), row);
            }
        }
        out
    }

    pub fn noise_std(&self, node: &str) -> Result<f64> {
        match self.model(node)? {
            NodeModel::Linear { noise_std, .. } => Ok(*noise_std),
            NodeModel::Root { .. } => Err(Error::invalid(format!("`{node}` is a root"))),
        }
    }

    /// Structural equation of `node` in raw units: `(intercept, [(parent index, slope)])`.
    pub fn raw_equation(&self, node: usize) -> Option<(f64, Vec<(usize, f64)>)> {
        let NodeModel::Linear { coefficients, .. } = &self.models[node] else {
            return None;
        };
        let si = self.stats.columns[self.graph.name(node)];
        let mut intercept = si.mean;
        let mut slopes = Vec::with_capacity(coefficients.len());
        for (&p, &c) in self.graph.parent_indices(node).iter().zip(coefficients) {
            let sp = self.stats.columns[self.graph.name(p)];
            let slope = c * si.std / sp.std;
            intercept -= slope * sp.mean;
            slopes.push((p, slope));
        }
        Some((intercept, slopes))
    }

    pub fn to_json(&self) -> Result<String> {
        crate::json::to_string(&ScmFile::from(self))
    }

    pub fn from_json(text: &str) -> Result<LinearScm> {
        crate::json::from_str::<ScmFile>(text)?.into_scm()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::json::write_file(path, &ScmFile::from(self))
    }

    pub fn load(path: &Path) -> Result<LinearScm> {
        crate::json::read_file::<ScmFile>(path)?.into_scm()
    }
}

fn fit_node(graph: &CausalGraph, columns: &[Vec<f64>], i: usize) -> Result<(NodeModel, NodeFit)> {
    let name = graph.name(i);
    let parents = graph.parent_indices(i);
    let n = columns[i].len() as f64;
    if parents.is_empty() {
        let fit = NodeFit {
            node: name.to_string(),
            n_parents: 0,
            r2: None,
            residual_std: None,
            condition_number: None,
        };
        return Ok((NodeModel::Root { samples: columns[i].clone() }, fit));
    }
    let p = parents.len();
    let gram = DMatrix::from_fn(p, p, |a, b| dot(&columns[parents[a]], &columns[parents[b]]) / n);
    let rhs = DVector::from_fn(p, |a, _| dot(&columns[parents[a]], &columns[i]) / n);
    let solved = solve_gram(name, gram, rhs)?;
    let y = &columns[i];
    let mut rss = 0.0;
    for (t, &yt) in y.iter().enumerate() {
        let pred: f64 = parents
            .iter()
            .zip(&solved.coefficients)
            .map(|(&pj, c)| c * columns[pj][t])
            .sum();
        rss += (yt - pred).powi(2);
    }
    let mean = y.iter().sum::<f64>() / n;
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let noise_std = (rss / n).sqrt();
    let fit = NodeFit {
        node: name.to_string(),
        n_parents: p,
        r2: Some(1.0 - rss / tss),
        residual_std: Some(noise_std),
        condition_number: Some(solved.condition),
    };
    Ok((
        NodeModel::Linear {
            coefficients: solved.coefficients,
            noise_std,
        },
        fit,
    ))
}

#[derive(Serialize, Deserialize)]
struct ScmFile {
    graph: String,
    stats: NormalizationStats,
    units: BTreeMap<String, String>,
    nodes: BTreeMap<String, NodeFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum NodeFile {
    Root { samples: Vec<f64> },
    Linear { coefficients: BTreeMap<String, f64>, noise_std: f64 },
}

impl From<&LinearScm> for ScmFile {
    fn from(scm: &LinearScm) -> Self {
        let coefs = scm.coefficients_normalized();
        let nodes = scm
            .graph
            .nodes()
            .iter()
            .zip(&scm.models)
            .map(|(name, m)| {
                let file = match m {
                    NodeModel::Root { samples } => NodeFile::Root { samples: samples.clone() },
                    NodeModel::Linear { noise_std, .. } => NodeFile::Linear {
                        coefficients: coefs[name].clone(),
                        noise_std: *noise_std,
                    },
                };
                (name.clone(), file)
            })
            .collect();
        ScmFile {
            graph: scm.graph.to_dsl(),
            stats: scm.stats.clone(),
            units: scm.units.clone(),
            nodes,
        }
    }
}

impl ScmFile {
    fn into_scm(self) -> Result<LinearScm> {
        let graph = CausalGraph::parse(&self.graph)?;
        let mut coefficients = BTreeMap::new();
        let mut noise = BTreeMap::new();
        let mut roots = BTreeMap::new();
        for name in graph.nodes() {
            match self.nodes.get(name) {
                Some(NodeFile::Root { samples }) => {
                    roots.insert(name.clone(), samples.clone());
                }
                Some(NodeFile::Linear { coefficients: c, noise_std }) => {
                    coefficients.insert(name.clone(), c.clone());
                    noise.insert(name.clone(), *noise_std);
                }
                None => return Err(Error::invalid(format!("model file lacks node `{name}`"))),
            }
        }
        LinearScm::from_parts(graph, &coefficients, &noise, &roots, self.stats, self.units)
    }
}

#[cfg(test)]
mod tests;
