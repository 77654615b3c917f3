use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum ErmError {
    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("kernel `{kernel}` does not satisfy: {requirement}")]
    KernelRequirement { kernel: String, requirement: String },

    #[error("quadrature produced a non-finite value ({context})")]
    Quadrature { context: String },

    #[error("eigensolver failed for {provenance}: {reason}")]
    Eigensolver { provenance: String, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ErmError>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> ErmError {
    ErmError::InvalidArgument {
        field,
        reason: reason.into(),
    }
}
