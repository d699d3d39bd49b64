//! Confounder-stratified bivariate regressions.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::FeatureFrame;

pub const DEFAULT_STRATA: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Classical OLS standard error of the slope; absent with two points.
    pub slope_se: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub index: usize,
    /// Confounder range covered by the stratum, inclusive.
    pub lo: f64,
    pub hi: f64,
    pub fit: LineFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedFit {
    pub x: String,
    pub y: String,
    pub confounder: String,
    pub k: usize,
    pub aggregate: LineFit,
    pub strata: Vec<Stratum>,
    /// Stratum index of every row.
    pub assignment: Vec<usize>,
}

impl StratifiedFit {
    /// True when the aggregate slope sign differs from every stratum's slope sign.
    pub fn sign_reversal(&self) -> bool {
        let agg = self.aggregate.slope.signum();
        agg != 0.0 && self.strata.iter().all(|s| s.fit.slope.signum() == -agg)
    }
}

/// Least-squares line `y = slope * x + intercept`.
pub fn ols_line(x: &[f64], y: &[f64]) -> Result<Line> {
    let f = fit_line(x, y)?;
    Ok(Line { slope: f.slope, intercept: f.intercept })
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::invalid("x and y differ in length"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Degenerate("a line fit needs at least two points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 || x.iter().all(|&v| v == x[0]) {
        return Err(Error::Degenerate("regressor is constant".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = (n > 2).then(|| {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    });
    Ok(LineFit { slope, intercept, slope_se, n })
}

/// Splits rows into `k` equal-count bins of the confounder and fits a line per bin.
///
/// Rows are ordered by a stable sort on the confounder, so tied values keep
/// their time order and may straddle a bin boundary.
pub fn stratified_slopes(
    frame: &FeatureFrame,
    x: &str,
    y: &str,
    confounder: &str,
    k: usize,
) -> Result<StratifiedFit> {
    if k < 2 {
        return Err(Error::invalid("stratification needs k >= 2"));
    }
    let xs = frame.values(x)?;
    let ys = frame.values(y)?;
    let cs = frame.values(confounder)?;
    let n = xs.len();
    if n < 2 * k {
        return Err(Error::Degenerate(format!(
            "{n} rows cannot fill {k} strata with two points each"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cs[a].total_cmp(&cs[b]));
    let mut assignment = vec![0usize; n];
    let mut strata = Vec::with_capacity(k);
    for b in 0..k {
        let rows = &order[b * n / k..(b + 1) * n / k];
        let bx: Vec<f64> = rows.iter().map(|&r| xs[r]).collect();
        let by: Vec<f64> = rows.iter().map(|&r| ys[r]).collect();
        let fit = fit_line(&bx, &by).map_err(|e| {
            Error::Degenerate(format!("stratum {b} of `{confounder}`: {e}"))
        })?;
        for &r in rows {
            assignment[r] = b;
        }
        strata.push(Stratum {
            index: b,
            lo: cs[rows[0]],
            hi: cs[*rows.last().expect("non-empty stratum")],
            fit,
        });
    }
    Ok(StratifiedFit {
        x: x.to_string(),
        y: y.to_string(),
        confounder: confounder.to_string(),
        k,
        aggregate: fit_line(xs, ys)?,
        strata,
        assignment,
    })
}

/// Plot-ready table: one `x, y, stratum` row per observation.
pub fn write_plot_csv<W: Write>(frame: &FeatureFrame, fit: &StratifiedFit, out: W) -> Result<()> {
    let xs = frame.values(&fit.x)?;
    let ys = frame.values(&fit.y)?;
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| Error::invalid(format!("writing plot table: {e}"));
    w.write_record([fit.x.as_str(), fit.y.as_str(), "stratum"]).map_err(io_err)?;
    for ((x, y), s) in xs.iter().zip(ys).zip(&fit.assignment) {
        w.write_record([x.to_string(), y.to_string(), s.to_string()])
            .map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::invalid(format!("writing plot table: {e}")))?;
    Ok(())
}

pub fn save_plot_csv(frame: &FeatureFrame, fit: &StratifiedFit, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_plot_csv(frame, fit, std::io::BufWriter::new(file))
}
