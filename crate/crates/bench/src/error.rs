use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot read config {path}: {source}")]
    ConfigFile {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed config {path}: {source}")]
    ConfigParse {
        path: PathBuf,
        source: serde_json::Error,
    },

    #[error(transparent)]
    Core(#[from] fastdeepc::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{method} did not converge: {detail}")]
    NotConverged { method: String, detail: String },
}

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

impl BenchError {
    /// Process exit code: 2 for configuration problems, 3 for a solver that
    /// stopped short of its tolerance, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use fastdeepc::Error as E;
        match self {
            BenchError::Config(_) | BenchError::ConfigFile { .. } | BenchError::ConfigParse { .. } => 2,
            BenchError::Core(E::InvalidArgument(_) | E::InsufficientData { .. } | E::DimensionMismatch { .. } | E::TooLarge { .. }) => 2,
            BenchError::NotConverged { .. } => 3,
            _ => 1,
        }
    }
}
