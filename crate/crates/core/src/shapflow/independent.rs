use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EdgeAttribution, EdgeKind, Mechanism};
use crate::error::{Error, Result};
use crate::gbt::GbtModel;
use crate::seed::rng_indexed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureAttribution {
    pub feature: String,
    pub value: f64,
    pub se: Option<f64>,
}

/// Permutation-sampling Shapley values with features perturbed independently.
/// Rows are ordered like the model's features.
pub fn shap_independent(
    model: &GbtModel,
    foreground: &[f64],
    background: &[Vec<f64>],
    n_perm: usize,
    seed: u64,
) -> Result<Vec<FeatureAttribution>> {
    shap_independent_with(model, &model.features, foreground, background, n_perm, seed)
}

/// As [`shap_independent`] for any mechanism over the named inputs.
pub fn shap_independent_with<M: Mechanism + ?Sized>(
    model: &M,
    names: &[String],
    foreground: &[f64],
    background: &[Vec<f64>],
    n_perm: usize,
    seed: u64,
) -> Result<Vec<FeatureAttribution>> {
    let p = names.len();
    if foreground.len() != p || background.iter().any(|b| b.len() != p) {
        return Err(Error::invalid(format!("rows must hold {p} feature values")));
    }
    if background.is_empty() || n_perm == 0 {
        return Err(Error::invalid("need a background row and at least one permutation"));
    }
    let samples: Vec<Vec<f64>> = (0..n_perm)
        .into_par_iter()
        .map(|j| {
            let mut rng = rng_indexed(seed, "shapflow/independent", j as u64);
            let mut x = background[rng.random_range(0..background.len())].clone();
            let mut order: Vec<usize> = (0..p).collect();
            order.shuffle(&mut rng);
            let mut out = vec![0.0; p];
            let mut prev = model.eval(&x);
            for f in order {
                x[f] = foreground[f];
                let cur = model.eval(&x);
                out[f] = cur - prev;
                prev = cur;
            }
            out
        })
        .collect();
    let n = n_perm as f64;
    Ok((0..p)
        .map(|f| {
            let mean = samples.iter().map(|s| s[f]).sum::<f64>() / n;
            let se = (n_perm > 1).then(|| {
                let ss: f64 = samples.iter().map(|s| (s[f] - mean).powi(2)).sum();
                (ss / (n - 1.0) / n).sqrt()
            });
            FeatureAttribution { feature: names[f].clone(), value: mean, se }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEdge {
    pub rank: usize,
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
    pub mean_abs: f64,
    pub mean: f64,
}

/// Graph edges ranked by mean absolute attribution across instances.
/// Source and noise edges are left out.
pub fn top_k_edges(attributions: &[EdgeAttribution], k: usize) -> Result<Vec<RankedEdge>> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    let first = attributions
        .first()
        .ok_or_else(|| Error::invalid("no explained instances"))?;
    let m = first.edges.len();
    if attributions.iter().any(|a| a.edges.len() != m) {
        return Err(Error::invalid("attributions come from different flow graphs"));
    }
    let n = attributions.len() as f64;
    let mut ranked: Vec<RankedEdge> = (0..m)
        .filter(|&e| matches!(first.edges[e].kind, EdgeKind::Causal | EdgeKind::Model))
        .map(|e| {
            let (abs, sum) = attributions
                .iter()
                .fold((0.0, 0.0), |(a, s), x| (a + x.edges[e].value.abs(), s + x.edges[e].value));
            RankedEdge {
                rank: 0,
                from: first.edges[e].from.clone(),
                to: first.edges[e].to.clone(),
                kind: first.edges[e].kind,
                mean_abs: abs / n,
                mean: sum / n,
            }
        })
        .collect();
    ranked.sort_by(|a, b| b.mean_abs.total_cmp(&a.mean_abs));
    ranked.truncate(k);
    for (i, r) in ranked.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(ranked)
}

/// `(source node value, edge flow)` for every instance.
pub fn dependence_data(attributions: &[EdgeAttribution], from: &str, to: &str) -> Result<Vec<(f64, f64)>> {
    attributions
        .iter()
        .map(|a| {
            let x = *a
                .foreground
                .get(from)
                .ok_or_else(|| Error::UnknownNode(from.to_string()))?;
            let flow = a.value(from, to).ok_or_else(|| Error::MissingEdge {
                from: from.to_string(),
                to: to.to_string(),
            })?;
            Ok((x, flow))
        })
        .collect()
}
