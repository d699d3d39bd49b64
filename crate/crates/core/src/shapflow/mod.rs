//! Shapley-flow attribution of a model's prediction to the edges of a causal graph.
//!
//! The flow graph extends the causal graph with a virtual source that feeds
//! every root and one additive noise node per non-root feature. Orderings are
//! depth-first traversals from the source in which each visit of a node
//! orders its outgoing edges independently; a path update propagates only
//! along that path.

mod exact;
mod independent;
mod mechanism;

pub use exact::{explain_rows, shapley_flow_exact, shapley_flow_exact_capped, shapley_flow_mc, Method};
pub use independent::{
    dependence_data, shap_independent, shap_independent_with, top_k_edges, FeatureAttribution, RankedEdge,
};
pub use mechanism::{FnMechanism, LinearMechanism, Mechanism, Reordered};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbt::{GbtModel, Hyperparams};
use crate::graph::CausalGraph;
use crate::scm::LinearScm;
use crate::seed::{derive_seed, rng_for};
use crate::timeseries::FeatureFrame;

pub const DEFAULT_ORDERING_CAP: f64 = 1e6;
pub const DEFAULT_BACKGROUND: usize = 100;
pub const DEFAULT_TOP_K: usize = 25;

/// Hyperparameters of the boosted mechanisms fitted for intermediate nodes.
pub const MECHANISM_HYPERPARAMS: Hyperparams = Hyperparams {
    n_trees: 50,
    max_depth: 3,
    learning_rate: 0.1,
    min_samples_leaf: 20,
    row_subsample: 1.0,
    feature_subsample: 1.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Linear,
    Gbt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Virtual source into a root or a noise node.
    Source,
    /// Noise node into the node it perturbs.
    Noise,
    /// Edge of the declared causal graph.
    Causal,
    /// Model input that is not a declared parent of the target.
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Source,
    Root,
    Feature,
    Noise { of: usize },
    Sink,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

/// Current edge messages and node values of one traversal.
#[derive(Debug, Clone)]
pub(crate) struct State {
    pub val: Vec<f64>,
    pub msg: Vec<f64>,
}

#[derive(Clone)]
pub struct FlowGraph {
    graph: CausalGraph,
    /// Graph nodes keep their indices; then the source, then noise nodes.
    names: Vec<String>,
    kinds: Vec<NodeKind>,
    edges: Vec<FlowEdge>,
    /// Per node, causal input edges in mechanism order.
    inputs: Vec<Vec<usize>>,
    noise_edge: Vec<Option<usize>>,
    source_edge: Vec<Option<usize>>,
    out_edges: Vec<Vec<usize>>,
    mechanisms: Vec<Option<Arc<dyn Mechanism>>>,
    sink: usize,
    source: usize,
    background: Vec<Vec<f64>>,
    background_states: Vec<(Vec<f64>, State)>,
}

impl fmt::Debug for FlowGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowGraph")
            .field("nodes", &self.names)
            .field("edges", &self.edges)
            .field("sink", &self.names[self.sink])
            .field("n_background", &self.background.len())
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeValue {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    pub value: f64,
    /// Monte Carlo standard error; absent for exact values or a single ordering.
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAttribution {
    /// Row of the explained instance, when known.
    pub instance: Option<usize>,
    pub foreground: BTreeMap<String, f64>,
    pub prediction: f64,
    /// Mean model output over the background rows.
    pub background_mean: f64,
    pub n_background: usize,
    /// Sampled orderings; absent for the exact method.
    pub n_orderings: Option<usize>,
    pub edges: Vec<EdgeValue>,
}

impl EdgeAttribution {
    pub fn get(&self, from: &str, to: &str) -> Option<&EdgeValue> {
        self.edges.iter().find(|e| e.from == from && e.to == to)
    }

    pub fn value(&self, from: &str, to: &str) -> Option<f64> {
        self.get(from, to).map(|e| e.value)
    }

    /// Sum over edges entering the target; equals `prediction - background_mean`.
    pub fn sink_total(&self, sink: &str) -> f64 {
        self.edges.iter().filter(|e| e.to == sink).map(|e| e.value).sum()
    }
}

impl FlowGraph {
    /// Assembles a flow graph. `mechanisms` maps every non-root node to its
    /// mechanism, with inputs ordered like the node's parents in `graph`.
    /// Background rows hold one value per graph node; the target entry is ignored.
    pub fn new(
        graph: CausalGraph,
        mut mechanisms: BTreeMap<String, Arc<dyn Mechanism>>,
        background: Vec<Vec<f64>>,
    ) -> Result<FlowGraph> {
        let sinks = graph.sinks();
        if sinks.len() != 1 {
            return Err(Error::InvalidGraph(format!(
                "a flow graph needs exactly one sink, found {}: {}",
                sinks.len(),
                sinks.join(", ")
            )));
        }
        let n = graph.n_nodes();
        if n < 2 {
            return Err(Error::InvalidGraph("a flow graph needs at least one feature and a target".into()));
        }
        let sink = graph.index_of(sinks[0])?;
        if background.is_empty() {
            return Err(Error::invalid("background set is empty"));
        }
        if let Some(b) = background.iter().find(|b| b.len() != n) {
            return Err(Error::invalid(format!(
                "background row has {} values for {n} graph nodes",
                b.len()
            )));
        }

        let mut names: Vec<String> = graph.nodes().to_vec();
        let mut kinds = vec![NodeKind::Feature; n];
        let mut mechs: Vec<Option<Arc<dyn Mechanism>>> = vec![None; n];
        for i in 0..n {
            let name = graph.name(i);
            let n_parents = graph.parent_indices(i).len();
            if n_parents == 0 {
                kinds[i] = NodeKind::Root;
                if mechanisms.contains_key(name) {
                    return Err(Error::invalid(format!("root `{name}` cannot have a mechanism")));
                }
                continue;
            }
            let m = mechanisms
                .remove(name)
                .ok_or_else(|| Error::invalid(format!("node `{name}` has no mechanism")))?;
            if let Some(arity) = m.n_inputs() {
                if arity != n_parents {
                    return Err(Error::invalid(format!(
                        "mechanism of `{name}` takes {arity} inputs but the node has {n_parents} parents"
                    )));
                }
            }
            mechs[i] = Some(m);
        }
        if let Some(extra) = mechanisms.keys().next() {
            return Err(Error::UnknownNode(extra.clone()));
        }
        kinds[sink] = NodeKind::Sink;

        let source = n;
        names.push("source".into());
        kinds.push(NodeKind::Source);
        mechs.push(None);
        let mut edges: Vec<FlowEdge> = graph
            .edge_indices()
            .iter()
            .map(|&(from, to)| FlowEdge { from, to, kind: EdgeKind::Causal })
            .collect();
        let mut inputs: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
        for i in 0..n {
            inputs[i] = graph
                .parent_indices(i)
                .iter()
                .map(|&p| edges.iter().position(|e| e.from == p && e.to == i).expect("parent edge"))
                .collect();
        }
        let mut noise_edge = vec![None; n + 1];
        let mut source_edge = vec![None; n + 1];
        for i in 0..n {
            match kinds[i] {
                NodeKind::Root => {
                    source_edge[i] = Some(edges.len());
                    edges.push(FlowEdge { from: source, to: i, kind: EdgeKind::Source });
                }
                NodeKind::Feature => {
                    let z = names.len();
                    names.push(format!("noise:{}", graph.name(i)));
                    kinds.push(NodeKind::Noise { of: i });
                    mechs.push(None);
                    inputs.push(Vec::new());
                    noise_edge.push(None);
                    source_edge.push(Some(edges.len()));
                    edges.push(FlowEdge { from: source, to: z, kind: EdgeKind::Source });
                    noise_edge[i] = Some(edges.len());
                    edges.push(FlowEdge { from: z, to: i, kind: EdgeKind::Noise });
                }
                _ => {}
            }
        }
        let mut out_edges = vec![Vec::new(); names.len()];
        for (k, e) in edges.iter().enumerate() {
            out_edges[e.from].push(k);
        }

        let mut fg = FlowGraph {
            graph,
            names,
            kinds,
            edges,
            inputs,
            noise_edge,
            source_edge,
            out_edges,
            mechanisms: mechs,
            sink,
            source,
            background,
            background_states: Vec::new(),
        };
        fg.background_states = fg
            .background
            .iter()
            .map(|b| {
                let src = fg.source_values(b);
                let state = fg.initial_state(&src);
                (src, state)
            })
            .collect();
        Ok(fg)
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn node_name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn node_kind(&self, i: usize) -> NodeKind {
        self.kinds[i]
    }

    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    /// Causal input edges of `node` in mechanism order.
    pub fn input_edges(&self, node: usize) -> &[usize] {
        &self.inputs[node]
    }

    pub fn noise_edge(&self, node: usize) -> Option<usize> {
        self.noise_edge[node]
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn sink_name(&self) -> &str {
        &self.names[self.sink]
    }

    pub fn background(&self) -> &[Vec<f64>] {
        &self.background
    }

    /// Number of nodes carrying a fitted mechanism, excluding the target.
    pub fn n_intermediate_mechanisms(&self) -> usize {
        (0..self.graph.n_nodes())
            .filter(|&i| i != self.sink && self.mechanisms[i].is_some())
            .count()
    }

    /// Evaluates the mechanism of a non-root graph node on its parent inputs.
    pub fn mechanism_eval(&self, node: usize, inputs: &[f64]) -> f64 {
        self.mechanisms[node]
            .as_ref()
            .expect("node has a mechanism")
            .eval(inputs)
    }

    /// Model output on a full row of graph-node values.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let inputs: Vec<f64> = self.graph.parent_indices(self.sink).iter().map(|&p| row[p]).collect();
        self.mechanism_eval(self.sink, &inputs)
    }

    /// Value carried by each source edge for a row: the root value, or the
    /// noise `x - g(parents)` for a perturbed feature.
    pub fn source_values(&self, row: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.edges.len()];
        for (k, e) in self.edges.iter().enumerate() {
            if e.kind != EdgeKind::Source {
                continue;
            }
            out[k] = match self.kinds[e.to] {
                NodeKind::Root => row[e.to],
                NodeKind::Noise { of } => {
                    let inputs: Vec<f64> =
                        self.graph.parent_indices(of).iter().map(|&p| row[p]).collect();
                    row[of] - self.mechanism_eval(of, &inputs)
                }
                _ => unreachable!("source edges end at roots or noise nodes"),
            };
        }
        out
    }

    /// Natural log of the number of depth-first orderings.
    pub fn log_orderings(&self) -> f64 {
        let mut memo = vec![None; self.n_nodes()];
        self.log_orderings_from(self.source, &mut memo)
    }

    fn log_orderings_from(&self, u: usize, memo: &mut Vec<Option<f64>>) -> f64 {
        if let Some(v) = memo[u] {
            return v;
        }
        let kids = &self.out_edges[u];
        let mut v: f64 = (2..=kids.len()).map(|i| (i as f64).ln()).sum();
        for &e in kids {
            v += self.log_orderings_from(self.edges[e].to, memo);
        }
        memo[u] = Some(v);
        v
    }

    pub(crate) fn eval_node(&self, u: usize, msg: &[f64]) -> f64 {
        match self.kinds[u] {
            NodeKind::Root | NodeKind::Noise { .. } => msg[self.source_edge[u].expect("source edge")],
            NodeKind::Feature | NodeKind::Sink => {
                let inputs: Vec<f64> = self.inputs[u].iter().map(|&e| msg[e]).collect();
                let base = self.mechanism_eval(u, &inputs);
                match self.noise_edge[u] {
                    Some(z) => base + msg[z],
                    None => base,
                }
            }
            NodeKind::Source => 0.0,
        }
    }

    /// State with every edge carrying the value of `src` and its consequences.
    pub(crate) fn initial_state(&self, src: &[f64]) -> State {
        let mut st = State { val: vec![0.0; self.n_nodes()], msg: vec![0.0; self.edges.len()] };
        for (k, e) in self.edges.iter().enumerate() {
            if e.kind == EdgeKind::Source {
                st.msg[k] = src[k];
                st.val[e.to] = src[k];
                if let NodeKind::Noise { .. } = self.kinds[e.to] {
                    for &z in &self.out_edges[e.to] {
                        st.msg[z] = src[k];
                    }
                }
            }
        }
        for &u in self.graph.topological_order() {
            st.val[u] = self.eval_node(u, &st.msg);
            for &e in &self.out_edges[u] {
                st.msg[e] = st.val[u];
            }
        }
        st
    }

    pub(crate) fn graph_row_map(&self, row: &[f64]) -> BTreeMap<String, f64> {
        (0..self.graph.n_nodes())
            .filter(|&i| i != self.sink)
            .map(|i| (self.names[i].clone(), row[i]))
            .collect()
    }

    pub(crate) fn check_row(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.graph.n_nodes() {
            return Err(Error::invalid(format!(
                "foreground row has {} values for {} graph nodes",
                row.len(),
                self.graph.n_nodes()
            )));
        }
        Ok(())
    }

    /// Values of all graph nodes at `row` of `frame`; the target column may be absent.
    pub fn frame_row(&self, frame: &FeatureFrame, row: usize) -> Result<Vec<f64>> {
        (0..self.graph.n_nodes())
            .map(|i| {
                if i == self.sink && !frame.has_column(self.graph.name(i)) {
                    Ok(0.0)
                } else {
                    frame.values(self.graph.name(i)).map(|v| v[row])
                }
            })
            .collect()
    }
}

/// Builds a flow graph around a trained model whose target is the graph's sink.
///
/// Intermediate nodes get mechanisms fitted on `rows` of `frame`; the
/// background is `n_background` seeded rows from the same set.
pub fn build_flow_graph(
    g: &CausalGraph,
    frame: &FeatureFrame,
    kind: MechanismKind,
    model: &GbtModel,
    rows: &[usize],
    n_background: usize,
    seed: u64,
) -> Result<FlowGraph> {
    let sinks = g.sinks();
    if sinks.len() != 1 {
        return Err(Error::InvalidGraph(format!(
            "a flow graph needs exactly one sink, found {}: {}",
            sinks.len(),
            sinks.join(", ")
        )));
    }
    let target = sinks[0];
    if model.target != target {
        return Err(Error::invalid(format!(
            "model predicts `{}` but the graph's sink is `{target}`",
            model.target
        )));
    }
    if model.trees.is_empty() && !model.degenerate {
        return Err(Error::invalid("model has not been fitted"));
    }
    for f in &model.features {
        if f == target || !g.contains(f) {
            return Err(Error::invalid(format!("model feature `{f}` is not a feature node of the graph")));
        }
    }
    if rows.is_empty() || n_background == 0 {
        return Err(Error::invalid("need at least one row for mechanisms and background"));
    }

    // every model input becomes an edge into the target
    let mut edges: Vec<(String, String)> = g.edges().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    for f in &model.features {
        if !g.has_edge(f, target) {
            edges.push((f.clone(), target.to_string()));
        }
    }
    let aug = CausalGraph::new(g.nodes().iter().map(String::as_str), edges.iter().map(|(a, b)| (a.as_str(), b.as_str())))?;

    let sink = aug.index_of(target)?;
    let mut mechanisms: BTreeMap<String, Arc<dyn Mechanism>> = BTreeMap::new();
    let sink_parents: Vec<&str> = aug.parent_indices(sink).iter().map(|&p| aug.name(p)).collect();
    let map = model
        .features
        .iter()
        .map(|f| sink_parents.iter().position(|p| p == f).expect("model feature is a parent"))
        .collect();
    mechanisms.insert(target.to_string(), Arc::new(Reordered::new(Arc::new(model.clone()), map, sink_parents.len())));

    let intermediates: Vec<usize> = (0..aug.n_nodes())
        .filter(|&i| i != sink && !aug.parent_indices(i).is_empty())
        .collect();
    match kind {
        MechanismKind::Linear => {
            let names: Vec<&str> = aug.nodes().iter().map(String::as_str).filter(|&n| n != target).collect();
            let sub_edges: Vec<(&str, &str)> = aug.edges().filter(|&(_, b)| b != target).collect();
            let sub = CausalGraph::new(names.iter().copied(), sub_edges)?;
            let data = frame.select_rows(rows).select(&names)?;
            let (scm, _) = LinearScm::fit(&sub, &data)?;
            for &i in &intermediates {
                let name = aug.name(i);
                let j = sub.index_of(name)?;
                let (intercept, slopes) = scm.raw_equation(j).expect("non-root has an equation");
                // sub-graph parents are in the same order as in the augmented graph
                let slopes = slopes.into_iter().map(|(_, s)| s).collect();
                mechanisms.insert(name.to_string(), Arc::new(LinearMechanism { intercept, slopes }));
            }
        }
        MechanismKind::Gbt => {
            let fitted: Vec<(String, Arc<dyn Mechanism>)> = {
                use rayon::prelude::*;
                intermediates
                    .par_iter()
                    .map(|&i| {
                        let name = aug.name(i);
                        let parents: Vec<&str> = aug.parent_indices(i).iter().map(|&p| aug.name(p)).collect();
                        let m = GbtModel::train(
                            frame,
                            &parents,
                            name,
                            rows,
                            &MECHANISM_HYPERPARAMS,
                            derive_seed(seed, &format!("shapflow/mechanism/{name}")),
                        )?;
                        Ok((name.to_string(), Arc::new(m) as Arc<dyn Mechanism>))
                    })
                    .collect::<Result<_>>()?
            };
            mechanisms.extend(fitted);
        }
    }

    let mut rng = rng_for(seed, "shapflow/background");
    let mut picked: Vec<usize> = if rows.len() <= n_background {
        rows.to_vec()
    } else {
        sample(&mut rng, rows.len(), n_background).into_iter().map(|k| rows[k]).collect()
    };
    picked.sort_unstable();
    // the augmented graph keeps the node order of `g`
    let background: Vec<Vec<f64>> = picked
        .iter()
        .map(|&r| {
            (0..aug.n_nodes())
                .map(|i| {
                    let name = aug.name(i);
                    if i == sink && !frame.has_column(name) {
                        Ok(0.0)
                    } else {
                        frame.values(name).map(|v| v[r])
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut fg = FlowGraph::new(aug, mechanisms, background)?;
    for e in &mut fg.edges {
        if e.to == sink && e.kind == EdgeKind::Causal && !g.has_edge(&fg.names[e.from], target) {
            e.kind = EdgeKind::Model;
        }
    }
    Ok(fg)
}
