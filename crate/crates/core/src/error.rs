use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The potential measure has no continuous density; callers must fall
    /// back to lattice logic.
    #[error("potential density unavailable for {0}")]
    DensityUnavailable(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("degenerate conditioning: {0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
