use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("data point {tag} is not valid for the {family} loss")]
    InvalidDataPoint { family: &'static str, tag: f64 },

    #[error("index {index} out of range for dataset of size {n}")]
    IndexOutOfRange { index: usize, n: usize },

    /// A required hypothesis or algorithm precondition the caller violated.
    #[error("{hypothesis} violated: {detail}")]
    Precondition { hypothesis: &'static str, detail: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn precondition(hypothesis: &'static str, detail: impl Into<String>) -> Self {
        Error::Precondition {
            hypothesis,
            detail: detail.into(),
        }
    }
}
