use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EdgeAttribution, EdgeValue, FlowGraph, State, DEFAULT_ORDERING_CAP};
use crate::error::{Error, Result};
use crate::seed::{derive_indexed, rng_indexed};
use crate::timeseries::FeatureFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo { n_orderings: usize, seed: u64 },
}

impl FlowGraph {
    fn transmit(&self, e: usize, st: &mut State, fore: &[f64]) {
        let edge = &self.edges[e];
        st.msg[e] = if edge.from == self.source { fore[e] } else { st.val[edge.from] };
        st.val[edge.to] = self.eval_node(edge.to, &st.msg);
    }

    /// Runs every path through `e` in a fixed order. The resulting state does
    /// not depend on the order.
    fn complete(&self, e: usize, st: &mut State, fore: &[f64]) {
        self.transmit(e, st, fore);
        for &c in &self.out_edges[self.edges[e].to] {
            self.complete(c, st, fore);
        }
    }

    fn exact_visit(&self, e: usize, st: &mut State, w: f64, fore: &[f64], acc: &mut [f64]) {
        let before = st.val[self.sink];
        self.transmit(e, st, fore);
        self.exact_expand(self.edges[e].to, st, w, fore, acc);
        acc[e] += w * (st.val[self.sink] - before);
    }

    /// Averages over the orderings of `u`'s outgoing edges: a child subtree
    /// starts from the state left by whichever subset of its siblings ran first.
    fn exact_expand(&self, u: usize, st: &mut State, w: f64, fore: &[f64], acc: &mut [f64]) {
        let kids = &self.out_edges[u];
        let k = kids.len();
        match k {
            0 => {}
            1 => self.exact_visit(kids[0], st, w, fore, acc),
            _ => {
                let full = (1usize << k) - 1;
                let mut states: Vec<State> = Vec::with_capacity(full + 1);
                states.push(st.clone());
                for mask in 1..=full {
                    let mut s = states[mask & (mask - 1)].clone();
                    self.complete(kids[mask.trailing_zeros() as usize], &mut s, fore);
                    states.push(s);
                }
                // weight of a given set of s predecessors: s! (k-1-s)! / k!
                let mut coef = vec![0.0; k];
                for (s, c) in coef.iter_mut().enumerate() {
                    *c = 1.0 / (k as f64 * binomial(k - 1, s));
                }
                for (i, &child) in kids.iter().enumerate() {
                    let bit = 1usize << i;
                    for mask in (0..=full).filter(|m| m & bit == 0) {
                        let mut s = states[mask].clone();
                        let wi = w * coef[mask.count_ones() as usize];
                        self.exact_visit(child, &mut s, wi, fore, acc);
                    }
                }
                *st = states.swap_remove(full);
            }
        }
    }

    fn random_expand(&self, u: usize, st: &mut State, rng: &mut ChaCha8Rng, fore: &[f64], acc: &mut [f64]) {
        let mut kids = self.out_edges[u].clone();
        kids.shuffle(rng);
        for e in kids {
            let before = st.val[self.sink];
            self.transmit(e, st, fore);
            self.random_expand(self.edges[e].to, st, rng, fore, acc);
            acc[e] += st.val[self.sink] - before;
        }
    }

    fn assemble(&self, fore: &[f64], values: Vec<f64>, se: Option<Vec<f64>>, n_orderings: Option<usize>) -> EdgeAttribution {
        let n_bg = self.background_states.len();
        let background_mean =
            self.background_states.iter().map(|(_, s)| s.val[self.sink]).sum::<f64>() / n_bg as f64;
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(k, e)| EdgeValue {
                from: self.names[e.from].clone(),
                to: self.names[e.to].clone(),
                kind: e.kind,
                value: values[k],
                se: se.as_ref().map(|s| s[k]),
            })
            .collect();
        EdgeAttribution {
            instance: None,
            foreground: self.graph_row_map(fore),
            prediction: self.predict(fore),
            background_mean,
            n_background: n_bg,
            n_orderings,
            edges,
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Exact Shapley flow averaged over the background rows, with the default ordering cap.
pub fn shapley_flow_exact(fg: &FlowGraph, foreground: &[f64]) -> Result<EdgeAttribution> {
    shapley_flow_exact_capped(fg, foreground, DEFAULT_ORDERING_CAP)
}

pub fn shapley_flow_exact_capped(fg: &FlowGraph, foreground: &[f64], cap: f64) -> Result<EdgeAttribution> {
    fg.check_row(foreground)?;
    let log_n = fg.log_orderings();
    if log_n > cap.ln() + 1e-9 {
        return Err(Error::TooManyOrderings { orderings: log_n.exp(), cap });
    }
    let fore = fg.source_values(foreground);
    let per_bg: Vec<Vec<f64>> = fg
        .background_states
        .par_iter()
        .map(|(_, init)| {
            let mut st = init.clone();
            let mut acc = vec![0.0; fg.edges.len()];
            fg.exact_expand(fg.source, &mut st, 1.0, &fore, &mut acc);
            acc
        })
        .collect();
    let (mean, _) = mean_se(&per_bg, fg.edges.len());
    Ok(fg.assemble(foreground, mean, None, None))
}

/// Sampled estimate: each ordering draws one background row and a uniform
/// depth-first traversal. Orderings use independent derived streams.
pub fn shapley_flow_mc(fg: &FlowGraph, foreground: &[f64], n_orderings: usize, seed: u64) -> Result<EdgeAttribution> {
    fg.check_row(foreground)?;
    if n_orderings == 0 {
        return Err(Error::invalid("n_orderings must be at least 1"));
    }
    let fore = fg.source_values(foreground);
    let n_bg = fg.background_states.len();
    let samples: Vec<Vec<f64>> = (0..n_orderings)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_indexed(seed, "shapflow/ordering", j as u64);
            let (_, init) = &fg.background_states[rng.random_range(0..n_bg)];
            let mut st = init.clone();
            let mut acc = vec![0.0; fg.edges.len()];
            fg.random_expand(fg.source, &mut st, &mut rng, &fore, &mut acc);
            acc
        })
        .collect();
    let (mean, se) = mean_se(&samples, fg.edges.len());
    Ok(fg.assemble(foreground, mean, se, Some(n_orderings)))
}

/// Per-column mean and standard error, summed in index order.
fn mean_se(samples: &[Vec<f64>], width: usize) -> (Vec<f64>, Option<Vec<f64>>) {
    let n = samples.len() as f64;
    let mut mean = vec![0.0; width];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    if samples.len() < 2 {
        return (mean, None);
    }
    let mut var = vec![0.0; width];
    for s in samples {
        for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
            *acc += (v - m).powi(2);
        }
    }
    let se = var.into_iter().map(|v| (v / (n - 1.0) / n).sqrt()).collect();
    (mean, Some(se))
}

/// Explains each row of `frame` independently and in parallel.
pub fn explain_rows(fg: &FlowGraph, frame: &FeatureFrame, rows: &[usize], method: Method) -> Result<Vec<EdgeAttribution>> {
    rows.par_iter()
        .map(|&r| {
            let fore = fg.frame_row(frame, r)?;
            let mut a = match method {
                Method::Exact => shapley_flow_exact(fg, &fore)?,
                Method::MonteCarlo { n_orderings, seed } => {
                    shapley_flow_mc(fg, &fore, n_orderings, derive_indexed(seed, "shapflow/instance", r as u64))?
                }
            };
            a.instance = Some(r);
            Ok(a)
        })
        .collect()
}
