use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use causalgrid::timeseries::{cyclical_encode, load_csv_all, write_csv_to, HolidayCalendar, CYCLICAL_COLUMNS};
use causalgrid::{CausalGraph, Error, FeatureFrame};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{DataArgs, THREADS_ENV};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Failure = 1,
    Usage = 2,
    Io = 3,
    Format = 4,
}

impl ExitStatus {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Usage(_) => ExitStatus::Usage,
            CliError::Core(e) => match e {
                Error::Io { .. } => ExitStatus::Io,
                Error::Format { .. }
                | Error::Schema(_)
                | Error::Parse { .. }
                | Error::Cycle(_)
                | Error::InvalidGraph(_)
                | Error::Serde(_) => ExitStatus::Format,
                // only reachable through user-supplied names and values
                Error::UnknownNode(_) | Error::InvalidArgument(_) => ExitStatus::Usage,
                _ => ExitStatus::Failure,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Applies `CAUSALGRID_THREADS` to the global pool once per process.
pub fn configure_threads() -> CliResult<()> {
    static CONFIGURED: OnceLock<()> = OnceLock::new();
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("{THREADS_ENV} must be a positive integer")))?;
    CONFIGURED.get_or_init(|| {
        // fails only when a pool already exists, which then stays in charge
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    });
    Ok(())
}

pub fn load_graph(spec: &str) -> CliResult<CausalGraph> {
    let path = Path::new(spec);
    if !path.exists() {
        match spec {
            "fr_market_price" => return Ok(CausalGraph::fr_market_price()),
            "fr_market_exports" => return Ok(CausalGraph::fr_market_exports()),
            _ => {}
        }
    }
    Ok(CausalGraph::load(path)?)
}

pub fn load_calendar(path: Option<&Path>) -> CliResult<HolidayCalendar> {
    match path {
        Some(p) => Ok(HolidayCalendar::load(p)?),
        None => Ok(HolidayCalendar::french()),
    }
}

/// Reads the CSV and, when the graph uses calendar columns the file lacks,
/// derives all of them from the timestamps.
pub fn load_frame(path: &Path, graph: Option<&CausalGraph>, calendar: Option<&Path>) -> CliResult<FeatureFrame> {
    let frame = load_csv_all(path)?;
    let needs_calendar = graph.is_some_and(|g| {
        CYCLICAL_COLUMNS.iter().any(|c| g.contains(c) && !frame.has_column(c))
    });
    let frame = if needs_calendar {
        if CYCLICAL_COLUMNS.iter().any(|c| frame.has_column(c)) {
            return Err(Error::Schema("calendar columns are only partly present".into()).into());
        }
        cyclical_encode(&frame, &load_calendar(calendar)?)?
    } else {
        frame
    };
    if let Some(g) = graph {
        for n in g.nodes() {
            frame.column(n)?;
        }
    }
    Ok(frame)
}

pub fn load_inputs(args: &DataArgs) -> CliResult<(CausalGraph, FeatureFrame)> {
    let graph = load_graph(&args.graph)?;
    let frame = load_frame(&args.data, Some(&graph), args.calendar.as_deref())?;
    Ok((graph, frame))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writes files under one root and remembers what was written.
pub struct Outputs {
    root: PathBuf,
    written: Vec<FileEntry>,
}

impl Outputs {
    pub fn new(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        let digest = Sha256::digest(bytes);
        self.written.push(FileEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(path)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> CliResult<PathBuf> {
        let text = causalgrid::json::to_string(value)?;
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn csv(&mut self, rel: &str, frame: &FeatureFrame) -> CliResult<PathBuf> {
        let mut bytes = Vec::new();
        write_csv_to(frame, &mut bytes)?;
        self.write_bytes(rel, &bytes)
    }

    /// Plain comma-separated table.
    pub fn table(&mut self, rel: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<PathBuf> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_bytes(rel, text.as_bytes())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.written
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io { path: path.to_path_buf(), source })
}

/// Shortest round-trip decimal for CSV cells.
pub fn num(v: f64) -> String {
    v.to_string()
}
