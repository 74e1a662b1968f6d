use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    /// An index, window or term count violates a positional constraint.
    #[error("bounds error: {0}")]
    Bounds(String),

    /// Input outside the domain of an estimator (empty sample, bad level, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A required column is missing from a delimited input.
    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: String, column: String },

    /// Data-level validation failure during ingestion.
    #[error("ingestion error: {0}")]
    Ingest(String),

    /// A (year, week) pair that does not occur in the dataset.
    #[error("week {year}-W{week:02} is not present in the dataset")]
    UnknownWeek { year: i32, week: u32 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
