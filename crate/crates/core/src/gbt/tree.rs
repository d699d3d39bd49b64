use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Tree node in pre-order storage. `Split` sends `x[feature] <= threshold` left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub(crate) fn predict_at(&self, columns: &[Vec<f64>], row: usize) -> f64 {
        match self.nodes[self.leaf_of(columns, row)] {
            TreeNode::Leaf { value } => value,
            TreeNode::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    /// Leaf index reached by `row`.
    fn leaf_of(&self, columns: &[Vec<f64>], row: usize) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { .. } => return i,
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if columns[feature][row] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Training inputs shared across the trees of one ensemble.
pub(crate) struct TrainData<'a> {
    /// Column-major features.
    pub columns: &'a [Vec<f64>],
    /// Per feature, training row indices sorted by value.
    pub sorted: Vec<Vec<u32>>,
    /// Feature values in the same sorted order.
    pub sorted_values: Vec<Vec<f64>>,
    pub n_rows: usize,
}

impl<'a> TrainData<'a> {
    pub fn new(columns: &'a [Vec<f64>]) -> Self {
        let n_rows = columns.first().map_or(0, Vec::len);
        let (sorted, sorted_values) = columns
            .par_iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..n_rows as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]));
                let vals = idx.iter().map(|&r| col[r as usize]).collect();
                (idx, vals)
            })
            .unzip();
        Self { columns, sorted, sorted_values, n_rows }
    }
}

pub(crate) struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub row_subsample: f64,
    pub feature_subsample: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

enum Proto {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf,
}

#[derive(Clone, Copy)]
struct Entry {
    row: u32,
    value: f64,
    residual: f64,
}

/// Best threshold within one node's rows, sorted by the feature's value.
fn best_split(entries: &[Entry], tot_n: usize, tot_s: f64, min_leaf: usize, feature: usize) -> Option<Candidate> {
    let parent = tot_s * tot_s / tot_n as f64;
    let (mut best_gain, mut best_at) = (f64::NEG_INFINITY, 0usize);
    let mut ls = 0.0f64;
    let mut last = f64::NAN;
    // a cut before position `i` needs `min_leaf` rows on both sides
    let hi = tot_n.saturating_sub(min_leaf);
    for (i, e) in entries.iter().enumerate() {
        let v = e.value;
        if i >= min_leaf && i <= hi && v > last {
            let sr = tot_s - ls;
            let gain = ls * ls / i as f64 + sr * sr / (tot_n - i) as f64 - parent;
            if gain > best_gain {
                best_gain = gain;
                best_at = i;
            }
        }
        ls += e.residual;
        last = v;
    }
    (best_at > 0).then(|| {
        let (a, v) = (entries[best_at - 1].value, entries[best_at].value);
        let mut threshold = a + (v - a) / 2.0;
        if threshold >= v {
            threshold = a;
        }
        Candidate { gain: best_gain, feature, threshold }
    })
}

/// Grows one tree level by level on `residual`, then sets each leaf to the
/// mean residual of all training rows that reach it.
pub(crate) fn grow_tree(
    data: &TrainData<'_>,
    residual: &[f64],
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> RegressionTree {
    let n = data.n_rows;
    let p = data.columns.len();
    let n_sub = ((params.row_subsample * n as f64).round() as usize).clamp(1, n);
    let p_sub = ((params.feature_subsample * p as f64).round() as usize).clamp(1, p);

    let mut active = vec![n_sub == n; n];
    if n_sub < n {
        for r in sample(rng, n, n_sub) {
            active[r] = true;
        }
    }
    let mut features: Vec<usize> = if p_sub == p {
        (0..p).collect()
    } else {
        sample(rng, p, p_sub).into_vec()
    };
    features.sort_unstable();

    // Per chosen feature, the active rows in sorted order. Rows of every
    // frontier node stay contiguous (and sorted) after each level's stable
    // partition, so split scans run sequentially per node.
    let mut segs: Vec<Vec<Entry>> = features
        .par_iter()
        .map(|&f| {
            data.sorted[f]
                .iter()
                .zip(&data.sorted_values[f])
                .filter(|(&r, _)| active[r as usize])
                .map(|(&row, &value)| Entry { row, value, residual: residual[row as usize] })
                .collect()
        })
        .collect();

    let mut protos = vec![Proto::Leaf];
    // (node id, start, end) into every segment
    let mut frontier: Vec<(usize, usize, usize)> = vec![(0, 0, n_sub)];
    let min_leaf = params.min_samples_leaf.max(1);
    let mut goes_left = vec![false; n];
    let mut spare: Vec<Vec<Entry>> = Vec::new();

    for depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let totals: Vec<(usize, f64, f64)> = frontier
            .iter()
            .map(|&(_, a, b)| {
                let (s, q) = segs[0][a..b]
                    .iter()
                    .fold((0.0, 0.0), |(s, q), e| (s + e.residual, q + e.residual * e.residual));
                (b - a, s, q)
            })
            .collect();

        let per_feature: Vec<Vec<Option<Candidate>>> = features
            .par_iter()
            .zip(&segs)
            .map(|(&f, seg)| {
                frontier
                    .iter()
                    .zip(&totals)
                    .map(|(&(_, a, b), &(tn, ts, _))| best_split(&seg[a..b], tn, ts, min_leaf, f))
                    .collect()
            })
            .collect();

        // (left id, right id, start, left count, end)
        let mut splits = Vec::new();
        for (k, &(id, a, b)) in frontier.iter().enumerate() {
            // features are in ascending order, so strict comparison keeps the lowest index on ties
            let mut chosen: Option<Candidate> = None;
            for cands in &per_feature {
                if let Some(c) = cands[k] {
                    if chosen.is_none_or(|b| c.gain > b.gain) {
                        chosen = Some(c);
                    }
                }
            }
            // ignore gains at rounding level of the node's sum of squares
            let Some(c) = chosen.filter(|c| c.gain > 1e-12 * totals[k].2 && c.gain > 0.0) else {
                continue;
            };
            let left = protos.len();
            protos.push(Proto::Leaf);
            protos.push(Proto::Leaf);
            protos[id] = Proto::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
            let col = &data.columns[c.feature];
            let mut n_left = 0;
            for e in &segs[0][a..b] {
                let l = col[e.row as usize] <= c.threshold;
                goes_left[e.row as usize] = l;
                n_left += usize::from(l);
            }
            splits.push((left, left + 1, a, n_left, b));
        }
        // leaves are refit from all rows afterwards, so the last level needs no partition
        if splits.is_empty() || depth + 1 == params.max_depth {
            break;
        }
        let kept: usize = splits.iter().map(|&(_, _, a, _, b)| b - a).sum();
        spare.resize(segs.len(), Vec::new());
        segs.par_iter().zip(spare.par_iter_mut()).for_each(|(seg, out)| {
            out.clear();
            out.resize(kept, Entry { row: 0, value: 0.0, residual: 0.0 });
            let mut start = 0;
            for &(_, _, a, n_left, b) in &splits {
                // branchless stable partition: slot 1 collects left rows, slot 0 right rows
                let mut at = [start + n_left, start];
                for e in &seg[a..b] {
                    let side = usize::from(goes_left[e.row as usize]);
                    out[at[side]] = *e;
                    at[side] += 1;
                }
                start += b - a;
            }
        });
        std::mem::swap(&mut segs, &mut spare);
        let mut start = 0;
        frontier = Vec::with_capacity(2 * splits.len());
        for &(l, r, a, n_left, b) in &splits {
            // children too small to split again are final
            if n_left >= 2 * min_leaf {
                frontier.push((l, start, start + n_left));
            }
            if b - a - n_left >= 2 * min_leaf {
                frontier.push((r, start + n_left, start + (b - a)));
            }
            start += b - a;
        }
    }

    // Pre-order relayout.
    let mut nodes = Vec::with_capacity(protos.len());
    fn emit(protos: &[Proto], id: usize, out: &mut Vec<TreeNode>) -> usize {
        let pos = out.len();
        match protos[id] {
            Proto::Leaf => out.push(TreeNode::Leaf { value: 0.0 }),
            Proto::Split { feature, threshold, left, right } => {
                out.push(TreeNode::Leaf { value: 0.0 });
                let l = emit(protos, left, out);
                let r = emit(protos, right, out);
                out[pos] = TreeNode::Split { feature, threshold, left: l, right: r };
            }
        }
        pos
    }
    emit(&protos, 0, &mut nodes);
    let mut tree = RegressionTree { nodes, max_depth: params.max_depth };

    let mut sums = vec![0.0f64; tree.nodes.len()];
    let mut counts = vec![0usize; tree.nodes.len()];
    for r in 0..n {
        let leaf = tree.leaf_of(data.columns, r);
        sums[leaf] += residual[r];
        counts[leaf] += 1;
    }
    for (i, node) in tree.nodes.iter_mut().enumerate() {
        if let TreeNode::Leaf { value } = node {
            *value = if counts[i] > 0 { sums[i] / counts[i] as f64 } else { 0.0 };
        }
    }
    tree
}
