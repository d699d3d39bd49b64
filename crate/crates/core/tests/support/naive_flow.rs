//! Brute-force Shapley flow: lists every depth-first ordering of source-to-sink
//! paths, replays each one path by path and averages the path credits.
//! Shared by the core integration tests and the acceptance suite.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use causalgrid::shapflow::{EdgeKind, FlowGraph, FnMechanism, Mechanism, NodeKind};
use causalgrid::CausalGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Path = Vec<usize>;

fn orderings(fg: &FlowGraph, u: usize, prefix: &Path) -> Vec<Vec<Path>> {
    let kids = fg.out_edges(u).to_vec();
    if kids.is_empty() {
        return vec![vec![prefix.clone()]];
    }
    let mut out = Vec::new();
    for perm in permutations(&kids) {
        let mut partial: Vec<Vec<Path>> = vec![Vec::new()];
        for e in perm {
            let mut p = prefix.clone();
            p.push(e);
            let subs = orderings(fg, fg.edges()[e].to, &p);
            let mut next = Vec::with_capacity(partial.len() * subs.len());
            for head in &partial {
                for tail in &subs {
                    let mut seq = head.clone();
                    seq.extend(tail.iter().cloned());
                    next.push(seq);
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

pub fn count_orderings(fg: &FlowGraph) -> usize {
    orderings(fg, fg.source(), &Vec::new()).len()
}

/// Noise carried into node `u` for a full row: `x_u - g_u(parents)`.
fn noise(fg: &FlowGraph, u: usize, row: &[f64]) -> f64 {
    let inputs: Vec<f64> = fg.graph().parent_indices(u).iter().map(|&p| row[p]).collect();
    row[u] - fg.mechanism_eval(u, &inputs)
}

/// Value sent along a source edge for a row.
fn source_value(fg: &FlowGraph, e: usize, row: &[f64]) -> f64 {
    let to = fg.edges()[e].to;
    match fg.node_kind(to) {
        NodeKind::Root => row[to],
        NodeKind::Noise { of } => noise(fg, of, row),
        k => panic!("source edge into {k:?}"),
    }
}

fn node_value(fg: &FlowGraph, u: usize, msg: &[f64]) -> f64 {
    match fg.node_kind(u) {
        NodeKind::Root | NodeKind::Noise { .. } => {
            let e = fg
                .edges()
                .iter()
                .position(|x| x.to == u && x.kind == EdgeKind::Source)
                .unwrap();
            msg[e]
        }
        _ => {
            let inputs: Vec<f64> = fg.input_edges(u).iter().map(|&e| msg[e]).collect();
            fg.mechanism_eval(u, &inputs) + fg.noise_edge(u).map_or(0.0, |z| msg[z])
        }
    }
}

/// Edge values averaged over all orderings and background rows.
pub fn naive_shapley_flow(fg: &FlowGraph, foreground: &[f64]) -> Vec<f64> {
    let orders = orderings(fg, fg.source(), &Vec::new());
    let edges = fg.edges();
    let mut total = vec![0.0; edges.len()];
    for bg in fg.background() {
        // background state: every message carries its background value
        let mut val = vec![0.0; fg.n_nodes()];
        let mut msg = vec![0.0; edges.len()];
        let mut settled = vec![false; fg.n_nodes()];
        settled[fg.source()] = true;
        while settled.iter().any(|s| !s) {
            for u in 0..fg.n_nodes() {
                if settled[u] {
                    continue;
                }
                let ready = edges.iter().filter(|e| e.to == u).all(|e| settled[e.from]);
                if !ready {
                    continue;
                }
                for (k, e) in edges.iter().enumerate().filter(|(_, e)| e.to == u) {
                    msg[k] = if e.from == fg.source() { source_value(fg, k, bg) } else { val[e.from] };
                }
                val[u] = node_value(fg, u, &msg);
                settled[u] = true;
            }
        }
        let mut per_bg = vec![0.0; edges.len()];
        for order in &orders {
            let mut v = val.clone();
            let mut m = msg.clone();
            let mut out = v[fg.sink()];
            for path in order {
                for &e in path {
                    let edge = &edges[e];
                    m[e] = if edge.from == fg.source() {
                        source_value(fg, e, foreground)
                    } else {
                        v[edge.from]
                    };
                    v[edge.to] = node_value(fg, edge.to, &m);
                }
                let credit = v[fg.sink()] - out;
                out = v[fg.sink()];
                for &e in path {
                    per_bg[e] += credit;
                }
            }
        }
        for (t, p) in total.iter_mut().zip(per_bg) {
            *t += p / orders.len() as f64;
        }
    }
    let n_bg = fg.background().len() as f64;
    total.into_iter().map(|t| t / n_bg).collect()
}

/// Every node set that contains the source, excludes the sink and is closed
/// under taking parents; returns the edges leaving each such set.
pub fn cuts(fg: &FlowGraph) -> Vec<Vec<usize>> {
    let n = fg.n_nodes();
    let others: Vec<usize> = (0..n).filter(|&u| u != fg.source() && u != fg.sink()).collect();
    let mut out = Vec::new();
    for mask in 0u64..(1 << others.len()) {
        let mut inside = vec![false; n];
        inside[fg.source()] = true;
        for (b, &u) in others.iter().enumerate() {
            inside[u] = mask >> b & 1 == 1;
        }
        let closed = fg.edges().iter().all(|e| !inside[e.to] || inside[e.from]);
        if closed {
            out.push(
                fg.edges()
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| inside[e.from] && !inside[e.to])
                    .map(|(k, _)| k)
                    .collect(),
            );
        }
    }
    out
}

/// All DAGs on `n` nodes whose edges follow the node order, with at most
/// `max_edges` edges and node `n-1` as the only sink. Up to relabelling this
/// covers every single-sink DAG of that size.
pub fn single_sink_dags(n: usize, max_edges: usize) -> Vec<Vec<(usize, usize)>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        if mask.count_ones() as usize > max_edges {
            continue;
        }
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        if (0..n - 1).all(|u| edges.iter().any(|&(a, _)| a == u)) {
            out.push(edges);
        }
    }
    out
}

/// Random single-sink DAG on up to `max_nodes` nodes and `max_edges` edges.
pub fn random_single_sink_dag(rng: &mut ChaCha8Rng, max_nodes: usize, max_edges: usize) -> Vec<(usize, usize)> {
    loop {
        let n = rng.random_range(2..=max_nodes);
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(0.5) {
                    edges.push((i, j));
                }
            }
        }
        if edges.len() <= max_edges && (0..n - 1).all(|u| edges.iter().any(|&(a, _)| a == u)) {
            return edges;
        }
    }
}

/// Flow graph on nodes `v0..v{n-1}` (names permuted by `labels`) with random
/// nonlinear mechanisms, `n_bg` background rows and one foreground row.
pub fn random_flow_graph(edges: &[(usize, usize)], n_bg: usize, seed: u64) -> (FlowGraph, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = edges.iter().map(|&(_, b)| b + 1).max().unwrap_or(1);
    let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let g = CausalGraph::new(
        names.iter().map(String::as_str),
        edges.iter().map(|&(a, b)| (names[a].as_str(), names[b].as_str())),
    )
    .unwrap();
    let mut mechanisms: BTreeMap<String, Arc<dyn Mechanism>> = BTreeMap::new();
    for i in 0..n {
        let k = g.parent_indices(i).len();
        if k == 0 {
            continue;
        }
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0..2.0)).collect();
        let c = rng.random_range(-1.0..1.0);
        let b = rng.random_range(-1.0..1.0);
        mechanisms.insert(
            names[i].clone(),
            Arc::new(FnMechanism(move |x: &[f64]| {
                let lin: f64 = w.iter().zip(x).map(|(a, v)| a * v).sum();
                let inter = if x.len() > 1 { x[0] * x[x.len() - 1] } else { x[0] * x[0] };
                lin + c * inter.tanh() + b
            })),
        );
    }
    let row = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        // values need not satisfy the mechanisms: the noise absorbs the gap
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
    };
    let background: Vec<Vec<f64>> = (0..n_bg).map(|_| row(&mut rng)).collect();
    let fore = row(&mut rng);
    (FlowGraph::new(g, mechanisms, background).unwrap(), fore)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
