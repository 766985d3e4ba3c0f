use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the wave-farm toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("row {row}: expected 49 fields, found {found}")]
    FieldCount { row: usize, found: usize },

    #[error("row {row}: column {column} is not a finite number: {value:?}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("{path}: {count} malformed rows, first {shown}:\n{details}")]
    MalformedRows {
        path: PathBuf,
        count: usize,
        shown: usize,
        details: String,
    },

    #[error("unknown scenario {0:?} (expected Sydney, Adelaide, Perth or Tasmania)")]
    UnknownScenario(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("model file version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
