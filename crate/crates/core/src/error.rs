use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum PdeError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("bounds error: {0}")]
    Bounds(String),

    #[error("schema error at {location}: {msg}")]
    Schema { location: String, msg: String },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("aggregation error: {0}")]
    Aggregation(String),

    #[error("ranking error: missing cells for {}", .missing.join(", "))]
    Ranking { missing: Vec<String> },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("perturbation rejected: {0}")]
    Rejected(String),

    #[error("group {group_id}: {msg}")]
    Group { group_id: String, msg: String },
}

impl PdeError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PdeError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        PdeError::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    pub(crate) fn schema(location: impl Into<String>, msg: impl Into<String>) -> Self {
        PdeError::Schema {
            location: location.into(),
            msg: msg.into(),
        }
    }

    /// Whether this error marks a record that should be skipped rather than
    /// failing the run (empty evaluation mask or a degenerate alignment).
    pub fn is_skip(&self) -> bool {
        matches!(self, PdeError::EmptyMask(_) | PdeError::DegenerateFit(_))
    }
}

pub type Result<T, E = PdeError> = std::result::Result<T, E>;
