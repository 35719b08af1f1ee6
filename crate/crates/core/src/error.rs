use thiserror::Error;

/// Errors produced by the OTFS ISAC library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtfsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A model precondition does not hold (for example a path delay beyond the CP).
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// The problem has no unique solution; the payload explains the fallback.
    #[error("degenerate problem: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, OtfsError>;
