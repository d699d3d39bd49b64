//! CSV ingestion and emission.
//!
//! Layout: a header row, the first column holding `YYYY-MM-DDTHH:MM:SSZ`
//! instants, `.` as decimal point and an empty cell for a missing value.

use std::io::{Read, Write};
use std::path::Path;

use super::{format_instant, parse_instant, FeatureFrame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSpec {
    pub name: String,
    pub unit: String,
}

/// Expected columns of a CSV file and their units.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new<N: Into<String>, U: Into<String>>(cols: impl IntoIterator<Item = (N, U)>) -> Self {
        Self {
            columns: cols
                .into_iter()
                .map(|(n, u)| ColumnSpec {
                    name: n.into(),
                    unit: u.into(),
                })
                .collect(),
        }
    }
}

/// Loads the declared columns of a CSV file, in schema order.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<FeatureFrame> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, Some(schema))
}

/// Loads every column of a CSV file with empty unit labels.
pub fn load_csv_all(path: &Path) -> Result<FeatureFrame> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, None)
}

pub fn read_csv<R: Read>(reader: R, schema: Option<&Schema>) -> Result<FeatureFrame> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Format {
            row: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() {
        return Err(Error::Format {
            row: 1,
            message: "empty header".into(),
        });
    }

    let wanted: Vec<(usize, String, String)> = match schema {
        Some(schema) => schema
            .columns
            .iter()
            .map(|spec| {
                headers
                    .iter()
                    .skip(1)
                    .position(|h| h == spec.name)
                    .map(|p| (p + 1, spec.name.clone(), spec.unit.clone()))
                    .ok_or_else(|| Error::Schema(format!("missing declared column `{}`", spec.name)))
            })
            .collect::<Result<_>>()?,
        None => headers
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, h)| (i, h.to_string(), String::new()))
            .collect(),
    };

    let mut timestamps = Vec::new();
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        let ts = parse_instant(record.get(0).unwrap_or("")).map_err(|e| Error::Format {
            row,
            message: e.to_string(),
        })?;
        timestamps.push(ts);
        for (slot, (col, name, _)) in wanted.iter().enumerate() {
            let cell = record.get(*col).unwrap_or("");
            let value = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| Error::Format {
                    row,
                    message: format!("column `{name}`: `{cell}` is not a number"),
                })?
            };
            data[slot].push(value);
        }
    }

    let mut frame = FeatureFrame::new(timestamps);
    for ((_, name, unit), values) in wanted.into_iter().zip(data) {
        frame.push_column(name, unit, values)?;
    }
    Ok(frame)
}

pub fn write_csv(frame: &FeatureFrame, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv_to(frame, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn write_csv_to<W: Write>(frame: &FeatureFrame, writer: W) -> Result<()> {
    let io_err = |e: csv::Error| Error::Format {
        row: 0,
        message: e.to_string(),
    };
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["timestamp".to_string()];
    header.extend(frame.names().map(str::to_string));
    wtr.write_record(&header).map_err(io_err)?;
    for r in 0..frame.n_rows() {
        let mut rec = vec![format_instant(&frame.timestamps()[r])];
        for col in frame.columns() {
            let v = col.values[r];
            rec.push(if v.is_nan() { String::new() } else { v.to_string() });
        }
        wtr.write_record(&rec).map_err(io_err)?;
    }
    wtr.flush().map_err(|e| Error::Format {
        row: 0,
        message: e.to_string(),
    })?;
    Ok(())
}
