use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation: {0}")]
    Validation(String),

    #[error("{path}: row {row}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{path}: no rows")]
    NoRows { path: PathBuf },

    #[error("schema mismatch: model requires feature group `{0}`")]
    SchemaMismatch(&'static str),

    #[error("genome has length {actual}, expected {expected}")]
    GenomeLength { expected: usize, actual: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("seed training did not reach its target: {what} = {achieved} (target {target})")]
    SeedTraining {
        what: &'static str,
        achieved: f64,
        target: f64,
    },

    #[error("individual {0} has not been evaluated")]
    Unevaluated(usize),

    #[error("point ({0}, {1}) does not dominate the reference point")]
    Reference(f64, f64),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
