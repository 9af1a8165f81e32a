use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad manifest content, missing inputs, bad CLI combination.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] accent_eval_core::Error),
}

impl HarnessError {
    /// Process exit code: 2 configuration or invalid content, 3 parse, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Parse(_) => 3,
            HarnessError::Core(e) if e.is_parse() => 3,
            HarnessError::Core(accent_eval_core::Error::Validation(_) | accent_eval_core::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
