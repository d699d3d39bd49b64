//! Hourly time series: ingestion, alignment, cleaning, derived features and
//! normalization statistics.
//!
//! Missing values are stored as `NaN` inside columns; [`FeatureFrame::is_complete`]
//! reports whether a frame is ready for fitting.

mod calendar;
mod features;
mod frame;
mod io;
mod normalize;

pub use calendar::{cyclical_encode, HolidayCalendar, CYCLICAL_COLUMNS};
pub use features::{
    derive_features, interpolate_missing, net_exports, nuclear_availability, pad_daily_to_hourly,
    ramp, residual_load,
};
pub use frame::{Column, FeatureFrame, TimeSeries};
pub use io::{load_csv, load_csv_all, read_csv, write_csv, write_csv_to, ColumnSpec, Schema};
pub use normalize::{denormalize, denormalize_coeff, normalize, ColumnStats, NormalizationStats};

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::{Error, Result};

pub const HOUR_SECONDS: i64 = 3600;

/// Parses `YYYY-MM-DDTHH:MM:SSZ`, `YYYY-MM-DDTHH:MMZ` or any RFC 3339 instant.
pub fn parse_instant(text: &str) -> Result<DateTime<Utc>> {
    let text = text.trim();
    for fmt in ["%Y-%m-%dT%H:%M:%SZ", "%Y-%m-%dT%H:%MZ"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(text, fmt) {
            return Ok(naive.and_utc());
        }
    }
    DateTime::parse_from_rfc3339(text)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| Error::invalid(format!("unparseable timestamp `{text}`: {e}")))
}

pub fn format_instant(t: &DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

/// Hourly axis of `n` instants starting at `start`.
pub fn hourly_axis(start: DateTime<Utc>, n: usize) -> Vec<DateTime<Utc>> {
    (0..n)
        .map(|h| start + chrono::Duration::hours(h as i64))
        .collect()
}

/// Serde adapter for instants in the CSV timestamp format.
pub mod instant_serde {
    use chrono::{DateTime, Utc};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &DateTime<Utc>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_instant(t))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DateTime<Utc>, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_instant(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instant_formats() {
        let a = parse_instant("2021-10-01T00:00Z").unwrap();
        let b = parse_instant("2021-10-01T00:00:00Z").unwrap();
        let c = parse_instant("2021-10-01T02:00:00+02:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(format_instant(&a), "2021-10-01T00:00:00Z");
        assert!(parse_instant("yesterday").is_err());
    }
}
