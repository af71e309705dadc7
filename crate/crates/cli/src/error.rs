use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid game or parameters: {0}")]
    Core(#[from] nearpot_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record in {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("series `{0}` is not present in any log of this run")]
    AbsentSeries(String),
    #[error("run has no trajectory logs to emit")]
    NoLogs,
    #[error("learner theta {learner} differs from flow theta {flow}")]
    ThetaMismatch { learner: f64, flow: f64 },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) | CliError::ThetaMismatch { .. } => 2,
            _ => 1,
        }
    }
}
