//! Graph falsification: Fisher-z conditional independence tests over the
//! local Markov conditions, compared against randomly relabeled graphs.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::graph::CausalGraph;
use crate::seed::rng_indexed;
use crate::timeseries::{ColumnStats, FeatureFrame};

/// Level at which the permutation p-values are read.
pub const SIGNIFICANCE: f64 = 0.05;

pub const DEFAULT_PERMUTATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiResult {
    pub x: String,
    pub y: String,
    pub z: Vec<String>,
    pub partial_correlation: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub independent: bool,
}

/// Fisher-z tests backed by one precomputed correlation matrix.
#[derive(Debug, Clone)]
pub struct CiTester {
    names: Vec<String>,
    index: HashMap<String, usize>,
    corr: DMatrix<f64>,
    n_rows: usize,
}

impl CiTester {
    pub fn new<S: AsRef<str>>(frame: &FeatureFrame, columns: &[S]) -> Result<Self> {
        let n = frame.n_rows();
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(columns.len());
        let mut names = Vec::with_capacity(columns.len());
        for c in columns {
            let name = c.as_ref();
            let v = frame.values(name)?;
            let s = ColumnStats::of(name, v)?;
            z.push(v.iter().map(|&x| s.normalize(x)).collect());
            names.push(name.to_string());
        }
        let p = names.len();
        let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a..p).map(move |b| (a, b))).collect();
        let vals: Vec<f64> = pairs
            .par_iter()
            .map(|&(a, b)| z[a].iter().zip(&z[b]).map(|(x, y)| x * y).sum::<f64>() / n as f64)
            .collect();
        let mut corr = DMatrix::zeros(p, p);
        for (&(a, b), v) in pairs.iter().zip(vals) {
            corr[(a, b)] = v;
            corr[(b, a)] = v;
        }
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(Self { names, index, corr, n_rows: n })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    fn idx(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("column `{name}` not available to the CI test")))
    }

    /// Partial correlation of `x` and `y` given `z`.
    pub fn partial_correlation<S: AsRef<str>>(&self, x: &str, y: &str, z: &[S]) -> Result<f64> {
        let xi = self.idx(x)?;
        let yi = self.idx(y)?;
        let zi: Vec<usize> = z.iter().map(|n| self.idx(n.as_ref())).collect::<Result<_>>()?;
        let r = |a: usize, b: usize| self.corr[(a, b)];
        let (rxy, rxx, ryy) = if zi.is_empty() {
            (r(xi, yi), r(xi, xi), r(yi, yi))
        } else {
            let k = zi.len();
            let rzz = DMatrix::from_fn(k, k, |a, b| r(zi[a], zi[b]));
            let eig = SymmetricEigen::new(rzz.clone());
            let (lmax, lmin) = (eig.eigenvalues.max(), eig.eigenvalues.min());
            if lmin <= lmax * f64::EPSILON * k as f64 * 16.0 {
                return Err(Error::Degenerate(format!(
                    "conditioning set {{{}}} is collinear",
                    z.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(", ")
                )));
            }
            let chol = rzz.cholesky().ok_or_else(|| {
                Error::Degenerate("conditioning set is collinear".into())
            })?;
            let rzx = DVector::from_fn(k, |a, _| r(zi[a], xi));
            let rzy = DVector::from_fn(k, |a, _| r(zi[a], yi));
            let bx = chol.solve(&rzx);
            let by = chol.solve(&rzy);
            (
                r(xi, yi) - rzx.dot(&by),
                r(xi, xi) - rzx.dot(&bx),
                r(yi, yi) - rzy.dot(&by),
            )
        };
        let denom = (rxx * ryy).sqrt();
        if !(denom > 1e-12) {
            return Err(Error::Degenerate(format!(
                "`{x}` or `{y}` is a linear function of the conditioning set"
            )));
        }
        Ok((rxy / denom).clamp(-1.0, 1.0))
    }

    pub fn test<S: AsRef<str>>(&self, x: &str, y: &str, z: &[S], alpha: f64) -> Result<CiResult> {
        let dof = self.n_rows as f64 - z.len() as f64 - 3.0;
        if dof <= 0.0 {
            return Err(Error::invalid(format!(
                "CI test with |Z| = {} needs more than {} rows",
                z.len(),
                z.len() + 3
            )));
        }
        let rho = self.partial_correlation(x, y, z)?;
        let statistic = rho.atanh() * dof.sqrt();
        let p_value = if statistic.is_finite() {
            erfc(statistic.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        Ok(CiResult {
            x: x.to_string(),
            y: y.to_string(),
            z: z.iter().map(|s| s.as_ref().to_string()).collect(),
            partial_correlation: rho,
            statistic,
            p_value,
            independent: p_value > alpha,
        })
    }

    pub fn columns(&self) -> &[String] {
        &self.names
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Single Fisher-z test of `x` independent of `y` given `z`.
pub fn fisher_z_ci<S: AsRef<str>>(
    frame: &FeatureFrame,
    x: &str,
    y: &str,
    z: &[S],
    alpha: f64,
) -> Result<CiResult> {
    check_alpha(alpha)?;
    let mut cols: Vec<&str> = vec![x, y];
    cols.extend(z.iter().map(|s| s.as_ref()));
    cols.sort_unstable();
    cols.dedup();
    CiTester::new(frame, &cols)?.test(x, y, z, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmcReport {
    pub violations: usize,
    pub total: usize,
    pub tests: Vec<CiResult>,
}

fn lmc_with(tester: &CiTester, g: &CausalGraph, alpha: f64) -> Result<LmcReport> {
    let tests = g
        .local_markov_pairs()
        .iter()
        .map(|t| tester.test(&t.x, &t.y, &t.z, alpha))
        .collect::<Result<Vec<_>>>()?;
    let violations = tests.iter().filter(|t| !t.independent).count();
    Ok(LmcReport { violations, total: tests.len(), tests })
}

/// Runs the CI test on every local Markov condition of `g`.
pub fn count_lmc_violations(g: &CausalGraph, frame: &FeatureFrame, alpha: f64) -> Result<LmcReport> {
    check_alpha(alpha)?;
    let tester = CiTester::new(frame, g.nodes())?;
    lmc_with(&tester, g, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTally {
    pub index: usize,
    /// `perm[i]` is the new label index of node `i`.
    pub permutation: Vec<usize>,
    pub violations: usize,
    pub markov_equivalent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRow {
    pub x: String,
    pub y: String,
    pub z_size: usize,
    pub rho: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FalsificationReport {
    pub violations: usize,
    pub total_tests: usize,
    /// Share of permuted graphs with at most as many violations as the original.
    pub p_lmc: f64,
    /// Share of permuted graphs Markov-equivalent to the original.
    pub p_mec: f64,
    pub n_permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    /// `p_mec <= 0.05`: random graphs rarely share the original's independencies.
    pub falsifiable: bool,
    /// `p_lmc <= 0.05`: the original fits the data better than random relabelings.
    pub not_falsified: bool,
    pub permutations: Vec<PermutationTally>,
    pub tests: Vec<CiRow>,
}

impl FalsificationReport {
    /// Recomputes both p-values from the stored tallies.
    pub fn rederive(&self) -> (f64, f64) {
        let n = self.permutations.len() as f64;
        let lmc = self
            .permutations
            .iter()
            .filter(|p| p.violations <= self.violations)
            .count() as f64;
        let mec = self.permutations.iter().filter(|p| p.markov_equivalent).count() as f64;
        (lmc / n, mec / n)
    }
}

/// Uniform random relabeling other than the identity.
fn non_identity_permutation(n: usize, seed: u64, index: u64) -> Vec<usize> {
    let mut rng = rng_indexed(seed, "falsify/permutation", index);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// Compares `g` against `n_perm` randomly relabeled copies of itself.
pub fn permutation_test(
    g: &CausalGraph,
    frame: &FeatureFrame,
    n_perm: usize,
    alpha: f64,
    seed: u64,
) -> Result<FalsificationReport> {
    check_alpha(alpha)?;
    if n_perm < 1 {
        return Err(Error::invalid("permutation test needs at least one permutation"));
    }
    if g.n_nodes() < 2 {
        return Err(Error::invalid("permutation test needs at least two nodes"));
    }
    let tester = CiTester::new(frame, g.nodes())?;
    let base = lmc_with(&tester, g, alpha)?;
    let permutations = (0..n_perm)
        .into_par_iter()
        .map(|k| {
            let permutation = non_identity_permutation(g.n_nodes(), seed, k as u64);
            let pg = g.relabel(&permutation)?;
            let rep = lmc_with(&tester, &pg, alpha)?;
            Ok(PermutationTally {
                index: k,
                permutation,
                violations: rep.violations,
                markov_equivalent: g.markov_equivalent(&pg)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = FalsificationReport {
        violations: base.violations,
        total_tests: base.total,
        p_lmc: 0.0,
        p_mec: 0.0,
        n_permutations: n_perm,
        alpha,
        seed,
        falsifiable: false,
        not_falsified: false,
        permutations,
        tests: base
            .tests
            .iter()
            .map(|t| CiRow {
                x: t.x.clone(),
                y: t.y.clone(),
                z_size: t.z.len(),
                rho: t.partial_correlation,
                p: t.p_value,
            })
            .collect(),
    };
    let (p_lmc, p_mec) = report.rederive();
    report.p_lmc = p_lmc;
    report.p_mec = p_mec;
    report.falsifiable = p_mec <= SIGNIFICANCE;
    report.not_falsified = p_lmc <= SIGNIFICANCE;
    Ok(report)
}
