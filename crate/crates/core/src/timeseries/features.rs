//! Daily-to-hourly padding, gap interpolation and derived market features.

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};

use super::{FeatureFrame, TimeSeries};
use crate::error::{Error, Result};

/// Repeats each daily value for the 24 hours of its UTC day. Days absent
/// from the input come out as 24 missing hours.
pub fn pad_daily_to_hourly(daily: &TimeSeries) -> Result<TimeSeries> {
    let mut by_day: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for (t, &v) in daily.timestamps.iter().zip(&daily.values) {
        if by_day.insert(t.date_naive(), v).is_some() {
            return Err(Error::invalid(format!(
                "series `{}` has more than one value for {}",
                daily.name,
                t.date_naive()
            )));
        }
    }
    let (Some(&first), Some(&last)) = (by_day.keys().next(), by_day.keys().next_back()) else {
        return TimeSeries::new(daily.name.clone(), daily.unit.clone(), Vec::new(), Vec::new());
    };
    let n_days = (last - first).num_days() as usize + 1;
    let start = first.and_hms_opt(0, 0, 0).unwrap().and_utc();
    let mut timestamps = Vec::with_capacity(n_days * 24);
    let mut values = Vec::with_capacity(n_days * 24);
    for d in 0..n_days {
        let day = first + Duration::days(d as i64);
        let v = by_day.get(&day).copied().unwrap_or(f64::NAN);
        for h in 0..24 {
            timestamps.push(start + Duration::hours((d * 24 + h) as i64));
            values.push(v);
        }
    }
    TimeSeries::new(daily.name.clone(), daily.unit.clone(), timestamps, values)
}

/// Fills missing values by linear interpolation in time. Leading and trailing
/// gaps take the nearest observed value.
pub fn interpolate_missing(series: &TimeSeries) -> Result<TimeSeries> {
    let known: Vec<usize> = (0..series.len())
        .filter(|&i| !series.values[i].is_nan())
        .collect();
    let (Some(&first), Some(&last)) = (known.first(), known.last()) else {
        return Err(Error::Degenerate(format!(
            "series `{}` has no observed values",
            series.name
        )));
    };
    let secs: Vec<f64> = series.timestamps.iter().map(|t| t.timestamp() as f64).collect();
    let mut values = series.values.clone();
    values[..first].fill(series.values[first]);
    values[last + 1..].fill(series.values[last]);
    for pair in known.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b == a + 1 {
            continue;
        }
        let (va, vb) = (series.values[a], series.values[b]);
        let span = secs[b] - secs[a];
        for i in a + 1..b {
            let w = (secs[i] - secs[a]) / span;
            values[i] = va + w * (vb - va);
        }
    }
    TimeSeries::new(
        series.name.clone(),
        series.unit.clone(),
        series.timestamps.clone(),
        values,
    )
}

/// Load minus wind and solar generation.
pub fn residual_load(load: &[f64], wind: &[f64], solar: &[f64]) -> Vec<f64> {
    load.iter()
        .zip(wind)
        .zip(solar)
        .map(|((l, w), s)| l - w - s)
        .collect()
}

/// Installed minus unavailable capacity.
pub fn nuclear_availability(installed: &[f64], unavailable: &[f64]) -> Vec<f64> {
    installed.iter().zip(unavailable).map(|(i, u)| i - u).collect()
}

/// Sum of exports minus sum of imports over all neighbours.
pub fn net_exports(exports: &[&[f64]], imports: &[&[f64]]) -> Vec<f64> {
    let n = exports
        .first()
        .or(imports.first())
        .map_or(0, |c| c.len());
    (0..n)
        .map(|t| {
            exports.iter().map(|e| e[t]).sum::<f64>() - imports.iter().map(|i| i[t]).sum::<f64>()
        })
        .collect()
}

/// First difference with the first element set to zero.
pub fn ramp(values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    if !values.is_empty() {
        out.push(0.0);
    }
    out.extend(values.windows(2).map(|w| w[1] - w[0]));
    out
}

fn require<'a>(frame: &'a FeatureFrame, name: &str, needed_for: &str) -> Result<&'a [f64]> {
    frame
        .values(name)
        .map_err(|_| Error::Schema(format!("missing source column `{name}` for `{needed_for}`")))
}

/// Appends `residual_load`, `residual_load_<zone>` (for every `load_<zone>`
/// column), `nuclear_availability`, `net_exports` and `rl_ramp`.
///
/// Required columns: `load`, `wind`, `solar`, `nuclear_installed`,
/// `nuclear_unavailable` and at least one matched `export_<zone>` /
/// `import_<zone>` pair.
pub fn derive_features(frame: &FeatureFrame) -> Result<FeatureFrame> {
    let mut out = frame.clone();
    let power_unit = frame.unit("load").unwrap_or("MW").to_string();

    let rl = residual_load(
        require(frame, "load", "residual_load")?,
        require(frame, "wind", "residual_load")?,
        require(frame, "solar", "residual_load")?,
    );

    let zones: Vec<String> = frame
        .names()
        .filter_map(|n| n.strip_prefix("load_"))
        .map(str::to_string)
        .collect();
    for zone in &zones {
        let target = format!("residual_load_{zone}");
        let values = residual_load(
            require(frame, &format!("load_{zone}"), &target)?,
            require(frame, &format!("wind_{zone}"), &target)?,
            require(frame, &format!("solar_{zone}"), &target)?,
        );
        let unit = frame.unit(&format!("load_{zone}"))?.to_string();
        out.push_column(target, unit, values)?;
    }

    let avail = nuclear_availability(
        require(frame, "nuclear_installed", "nuclear_availability")?,
        require(frame, "nuclear_unavailable", "nuclear_availability")?,
    );
    let avail_unit = frame.unit("nuclear_installed")?.to_string();

    let export_zones: Vec<&str> = frame.names().filter_map(|n| n.strip_prefix("export_")).collect();
    let import_zones: Vec<&str> = frame.names().filter_map(|n| n.strip_prefix("import_")).collect();
    if export_zones.is_empty() && import_zones.is_empty() {
        return Err(Error::Schema(
            "missing source column `export_<zone>` for `net_exports`".into(),
        ));
    }
    for z in &export_zones {
        require(frame, &format!("import_{z}"), "net_exports")?;
    }
    for z in &import_zones {
        require(frame, &format!("export_{z}"), "net_exports")?;
    }
    let exports: Vec<&[f64]> = export_zones
        .iter()
        .map(|z| frame.values(&format!("export_{z}")))
        .collect::<Result<_>>()?;
    let imports: Vec<&[f64]> = export_zones
        .iter()
        .map(|z| frame.values(&format!("import_{z}")))
        .collect::<Result<_>>()?;
    let net = net_exports(&exports, &imports);
    let net_unit = frame.unit(&format!("export_{}", export_zones[0]))?.to_string();

    let rl_ramp = ramp(&rl);
    out.push_column("residual_load", power_unit.clone(), rl)?;
    out.push_column("nuclear_availability", avail_unit, avail)?;
    out.push_column("net_exports", net_unit, net)?;
    out.push_column("rl_ramp", format!("{power_unit}/h"), rl_ramp)?;
    Ok(out)
}
