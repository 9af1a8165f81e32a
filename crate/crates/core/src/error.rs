use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by every metric in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input file. `context` names the offending chunk, line or field.
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Input that makes the computation numerically meaningless (all-zero frame, zero variance).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Two inputs that cannot be compared (label, dimension, config mismatch).
    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// A caller-side precondition was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Well-formed input whose content violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("formant extraction failed: {0}")]
    FormantExtraction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by malformed file content rather than configuration.
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::UnsupportedFormat(_))
    }
}
