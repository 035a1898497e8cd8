use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("schema mismatch: expected {expected} features, got {actual}")]
    SchemaMismatch { expected: usize, actual: usize },

    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Ingest { path: PathBuf, reason: String },

    #[error("{path}: row {row}, column `{column}`: {reason}")]
    Cell {
        path: PathBuf,
        row: usize,
        column: String,
        reason: String,
    },

    #[error("degenerate clustering: only {distinct} distinct points for k={k}")]
    DegenerateClustering { distinct: usize, k: usize },

    #[error("empty partition: {0}")]
    EmptyPartition(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// Failure while processing the `index`-th instance (1-based) of a run.
    #[error("instance {index}: {source}")]
    AtInstance {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The underlying error, looking through [`Error::AtInstance`].
    pub fn root(&self) -> &Error {
        match self {
            Error::AtInstance { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
