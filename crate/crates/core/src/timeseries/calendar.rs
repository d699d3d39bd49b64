use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::path::Path;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Utc, Weekday};

use super::FeatureFrame;
use crate::error::{Error, Result};

/// Names of the columns appended by [`cyclical_encode`], in order.
pub const CYCLICAL_COLUMNS: [&str; 5] = ["hour_sin", "hour_cos", "doy_sin", "doy_cos", "is_working_day"];

const DAYS_PER_YEAR: f64 = 365.25;

/// Public holidays, one date per line (`#` starts a comment).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    dates: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn parse(text: &str) -> Result<Self> {
        let mut dates = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let date = NaiveDate::parse_from_str(line, "%Y-%m-%d").map_err(|e| Error::Parse {
                line: i + 1,
                message: format!("`{line}`: {e}"),
            })?;
            dates.insert(date);
        }
        Ok(Self { dates })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// French public holidays 2010-2030 as shipped with the crate.
    pub fn french() -> Self {
        Self::parse(include_str!("../../data/holidays_fr.txt")).expect("bundled calendar parses")
    }

    pub fn is_holiday(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn is_working_day(&self, date: NaiveDate) -> bool {
        !matches!(date.weekday(), Weekday::Sat | Weekday::Sun) && !self.is_holiday(date)
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// `[hour_sin, hour_cos, doy_sin, doy_cos, is_working_day]` at `t`.
    pub fn encode(&self, t: &DateTime<Utc>) -> [f64; 5] {
        let hour = TAU * f64::from(t.hour()) / 24.0;
        let doy = TAU * f64::from(t.ordinal()) / DAYS_PER_YEAR;
        let working = if self.is_working_day(t.date_naive()) { 1.0 } else { 0.0 };
        [hour.sin(), hour.cos(), doy.sin(), doy.cos(), working]
    }
}

/// Appends sine/cosine encodings of hour of day (period 24) and day of year
/// (period 365.25) plus a binary working-day flag.
pub fn cyclical_encode(frame: &FeatureFrame, calendar: &HolidayCalendar) -> Result<FeatureFrame> {
    let encoded: Vec<[f64; 5]> = frame.timestamps().iter().map(|t| calendar.encode(t)).collect();
    let mut out = frame.clone();
    for (k, name) in CYCLICAL_COLUMNS.iter().enumerate() {
        out.push_column(*name, "", encoded.iter().map(|e| e[k]).collect())?;
    }
    Ok(out)
}
