use thiserror::Error;

#[derive(Debug, Error)]
pub enum ListenError {
    #[error("{0} not found")]
    NotFound(String),

    /// The request conflicts with stored state (duplicate listener, revision, re-finalize).
    #[error("conflict: {0}")]
    Conflict(String),

    /// The session is not in a state that allows the operation.
    #[error("invalid state: {0}")]
    State(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("store I/O: {0}")]
    Io(#[from] std::io::Error),

    #[error("corrupt event log at line {line}: {message}")]
    CorruptLog { line: usize, message: String },
}

impl ListenError {
    /// Machine-readable kind used in HTTP error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            ListenError::NotFound(_) => "not_found",
            ListenError::Conflict(_) => "conflict",
            ListenError::State(_) => "invalid_state",
            ListenError::Validation(_) => "validation",
            ListenError::Io(_) => "io",
            ListenError::CorruptLog { .. } => "corrupt_log",
        }
    }
}
