//! Crate-wide error type.

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input record. `row` is 1-based and counts the header as row 1.
    #[error("format error at row {row}: {message}")]
    Format { row: usize, message: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("graph contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("degenerate column `{0}`: standard deviation is zero")]
    DegenerateColumn(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular fit for node `{0}`: parent matrix is rank deficient")]
    SingularFit(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("no edge {from} -> {to}")]
    MissingEdge { from: String, to: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exact Shapley flow needs {orderings:.3e} orderings, above the cap of {cap:.3e}; use the sampling estimator")]
    TooManyOrderings { orderings: f64, cap: f64 },

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
