use std::path::PathBuf;

use qapcore::QapError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] QapError),
    #[error("config error: {0}")]
    Config(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }

    /// 2 for configuration problems, 3 for failed verification, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Core(e) if e.is_config() => 2,
            BenchError::Verification(_) => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
