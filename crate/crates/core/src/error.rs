use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by ingestion, fitting, evaluation and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("domain error{}: {field} = {value} ({constraint})", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Domain {
        field: &'static str,
        value: f64,
        constraint: &'static str,
        line: Option<usize>,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("undefined R² score: truths have zero variance")]
    UndefinedVariance,

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("model serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("grid cell [{cell}]: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Param(msg.into())
}
