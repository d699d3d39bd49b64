use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{LinearScm, NodeModel};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::timeseries::{hourly_axis, parse_instant, FeatureFrame};

/// Sampled frames carry an hourly axis starting here.
const SAMPLE_EPOCH: &str = "2000-01-01T00:00:00Z";

impl LinearScm {
    /// Observational sample of `n` rows in raw units.
    pub fn sample(&self, n: usize, seed: u64) -> Result<FeatureFrame> {
        self.intervene_sample(&BTreeMap::new(), n, seed)
    }

    /// Sample under `do(node = value)` for each entry (raw units).
    ///
    /// Roots share one resampled row index per draw, so their joint empirical
    /// distribution is kept. Every node owns a noise stream derived from
    /// `seed` and its name: two calls with the same seed use common random
    /// numbers, which makes interventional contrasts low-variance.
    pub fn intervene_sample(
        &self,
        interventions: &BTreeMap<String, f64>,
        n: usize,
        seed: u64,
    ) -> Result<FeatureFrame> {
        let g = &self.graph;
        let mut fixed: Vec<Option<f64>> = vec![None; g.n_nodes()];
        for (name, &value) in interventions {
            let i = g.index_of(name)?;
            if !value.is_finite() {
                return Err(Error::invalid(format!("intervention on `{name}` is not finite")));
            }
            fixed[i] = Some(self.stats.get(name)?.normalize(value));
        }

        let mut root_rng = rng_for(seed, "scm/roots");
        let draws: Vec<f64> = (0..n).map(|_| root_rng.random::<f64>()).collect();

        let mut columns: Vec<Vec<f64>> = vec![Vec::new(); g.n_nodes()];
        for &i in g.topological_order() {
            let name = g.name(i);
            let col = if let Some(v) = fixed[i] {
                vec![v; n]
            } else {
                match &self.models[i] {
                    NodeModel::Root { samples } => draws
                        .iter()
                        .map(|&u| samples[((u * samples.len() as f64) as usize).min(samples.len() - 1)])
                        .collect(),
                    NodeModel::Linear { coefficients, noise_std } => {
                        let mut rng = rng_for(seed, &format!("scm/noise/{name}"));
                        let parents = g.parent_indices(i);
                        (0..n)
                            .map(|t| {
                                let z: f64 = rng.sample(StandardNormal);
                                parents
                                    .iter()
                                    .zip(coefficients)
                                    .map(|(&p, c)| c * columns[p][t])
                                    .sum::<f64>()
                                    + noise_std * z
                            })
                            .collect()
                    }
                }
            };
            columns[i] = col;
        }

        let start = parse_instant(SAMPLE_EPOCH)?;
        let mut frame = FeatureFrame::new(hourly_axis(start, n));
        for (i, col) in columns.into_iter().enumerate() {
            let name = g.name(i);
            let s = self.stats.get(name)?;
            let raw = col.into_iter().map(|z| s.denormalize(z)).collect();
            frame.push_column(name, self.unit(name), raw)?;
        }
        Ok(frame)
    }
}
