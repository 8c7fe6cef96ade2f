use thiserror::Error;

/// Errors raised anywhere in the allocation toolkit.
#[derive(Debug, Error)]
pub enum QapError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("infeasible instance: {0}")]
    Infeasible(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("malformed {what} at line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, QapError>;

impl QapError {
    /// Whether the error stems from invalid user input rather than a runtime failure.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            QapError::Config(_)
                | QapError::Dimension(_)
                | QapError::Infeasible(_)
                | QapError::TooLarge(_)
                | QapError::Format { .. }
                | QapError::Json(_)
        )
    }
}
