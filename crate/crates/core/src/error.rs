use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the design chain.
///
/// `Invalid`, `ShapeMismatch`, `Parse`, `Io` and `Json` describe bad inputs.
/// `Domain` covers numerically degenerate requests on otherwise well-formed
/// inputs (zero denominators, zero field energy, a channel in deep fade).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("{field}: {reason}")]
    Domain { field: String, reason: String },

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn domain(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True when the error stems from malformed or inconsistent input rather
    /// than a numerically degenerate computation.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Domain { .. })
    }
}
