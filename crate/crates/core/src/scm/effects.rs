use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::LinearScm;
use crate::error::{Error, Result};
use crate::graph::DirectedPath;
use crate::timeseries::FeatureFrame;

/// Default start of the crisis period.
pub const DEFAULT_CRISIS_SPLIT: &str = "2021-10-01T00:00:00Z";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathContribution {
    pub path: DirectedPath,
    pub product: f64,
}

/// Direct, per-path and total effect of `source` on `target` in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub source: String,
    pub target: String,
    /// Coefficient of the edge `source -> target`, zero without that edge.
    pub direct: f64,
    pub has_direct_edge: bool,
    pub paths: Vec<PathContribution>,
    pub total: f64,
    /// Target unit per source unit.
    pub unit: String,
}

impl EffectReport {
    pub fn indirect(&self) -> f64 {
        self.total - self.direct
    }
}

/// `c_ij * (mean_during - mean_before)` for one edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrisisImpact {
    pub source: String,
    pub target: String,
    pub coefficient: f64,
    pub mean_before: f64,
    pub mean_during: f64,
    pub delta: f64,
    pub impact: f64,
    pub unit: String,
}

/// Bivariate regression slope set against the causal total effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionComparison {
    pub source: String,
    pub target: String,
    pub regression_slope: f64,
    pub causal: EffectReport,
}

/// Least-squares slope of `y` on `x` with intercept.
pub fn regression_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid("regression needs two equal-length series of length >= 2"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("regressor is constant".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

fn segment_means(
    frame: &FeatureFrame,
    column: &str,
    split: DateTime<Utc>,
) -> Result<(f64, f64)> {
    let values = frame.values(column)?;
    let (mut sb, mut nb, mut sd, mut nd) = (0.0, 0usize, 0.0, 0usize);
    for (t, &v) in frame.timestamps().iter().zip(values) {
        if *t < split {
            sb += v;
            nb += 1;
        } else {
            sd += v;
            nd += 1;
        }
    }
    if nb == 0 || nd == 0 {
        return Err(Error::invalid(format!(
            "split {} leaves an empty {} segment",
            crate::timeseries::format_instant(&split),
            if nb == 0 { "before" } else { "during" }
        )));
    }
    Ok((sb / nb as f64, sd / nd as f64))
}

impl LinearScm {
    /// Raw-unit coefficient of the edge `from -> to`.
    pub fn direct_effect(&self, from: &str, to: &str) -> Result<f64> {
        self.coefficient(from, to)
    }

    /// Product of raw-unit coefficients along `path`.
    pub fn path_effect(&self, path: &DirectedPath) -> Result<f64> {
        if path.len() < 2 {
            return Err(Error::invalid("a path needs at least two nodes"));
        }
        path.edges()
            .try_fold(1.0, |acc, (a, b)| Ok(acc * self.coefficient(a, b)?))
    }

    pub fn total_effect(&self, source: &str, target: &str) -> Result<EffectReport> {
        let paths = self.graph.enumerate_paths(source, target)?;
        let paths = paths
            .into_iter()
            .map(|path| {
                let product = self.path_effect(&path)?;
                Ok(PathContribution { path, product })
            })
            .collect::<Result<Vec<_>>>()?;
        let total = paths.iter().map(|p| p.product).sum();
        let has_direct_edge = self.graph.has_edge(source, target);
        let direct = if has_direct_edge {
            self.coefficient(source, target)?
        } else {
            0.0
        };
        Ok(EffectReport {
            source: source.to_string(),
            target: target.to_string(),
            direct,
            has_direct_edge,
            paths,
            total,
            unit: match (self.unit(target), self.unit(source)) {
                ("", "") => String::new(),
                (t, s) => format!("{} per {}", or_one(t), or_one(s)),
            },
        })
    }

    /// Impact of the shift in `from` between the two periods on `to`.
    pub fn crisis_impact(
        &self,
        frame: &FeatureFrame,
        split: DateTime<Utc>,
        from: &str,
        to: &str,
    ) -> Result<CrisisImpact> {
        let coefficient = self.coefficient(from, to)?;
        let (mean_before, mean_during) = segment_means(frame, from, split)?;
        let delta = mean_during - mean_before;
        Ok(CrisisImpact {
            source: from.to_string(),
            target: to.to_string(),
            coefficient,
            mean_before,
            mean_during,
            delta,
            impact: coefficient * delta,
            unit: self.unit(to).to_string(),
        })
    }

    pub fn compare_regression(
        &self,
        frame: &FeatureFrame,
        source: &str,
        target: &str,
    ) -> Result<RegressionComparison> {
        let slope = regression_slope(frame.values(source)?, frame.values(target)?)?;
        Ok(RegressionComparison {
            source: source.to_string(),
            target: target.to_string(),
            regression_slope: slope,
            causal: self.total_effect(source, target)?,
        })
    }
}

/// Crisis impact of every parent of `target`, largest impact first.
pub fn crisis_impacts(
    scm: &LinearScm,
    frame: &FeatureFrame,
    split: DateTime<Utc>,
    target: &str,
) -> Result<Vec<CrisisImpact>> {
    let mut out = scm
        .graph()
        .parents(target)?
        .into_iter()
        .map(|p| scm.crisis_impact(frame, split, p, target))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| b.impact.total_cmp(&a.impact).then_with(|| a.source.cmp(&b.source)));
    Ok(out)
}

fn or_one(unit: &str) -> &str {
    if unit.is_empty() {
        "1"
    } else {
        unit
    }
}
