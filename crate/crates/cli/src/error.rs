use std::path::Path;

use thiserror::Error;

use qcomp_ppo::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input values; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or unwritable files; exit code 2.
    #[error("{path}: {reason}")]
    Io { path: String, reason: String },
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Io { path, source } => CliError::Io {
                path,
                reason: source.to_string(),
            },
            TrainError::Format { path, reason } => CliError::Io { path, reason },
            other => CliError::Usage(other.to_string()),
        }
    }
}
