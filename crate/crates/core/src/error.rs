use thiserror::Error;

/// Errors surfaced by the estimation and breakdown routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates a model constraint (e.g. nonpositive scale).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine produced a non-finite or inconsistent value.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Invalid run configuration (bad grid, zero draws, missing input).
    #[error("configuration error: {0}")]
    Config(String),

    /// I/O while reading designs or writing tables.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
