//! Crate-wide error type.

/// Errors raised by samplers, path constructors, and experiments.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A distribution or family parameter is outside its admissible range.
    #[error("parameter out of domain: {0}")]
    Parameter(String),
    /// Input sequences have incompatible lengths or ordering.
    #[error("shape error: {0}")]
    Shape(String),
    /// A query point lies outside the region a path or grid is valid on.
    #[error("domain error: {0}")]
    Domain(String),
    /// A statistical precondition of an experiment is violated.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// A numeric evaluation produced a non-finite value; carries the offending state.
    #[error("numeric error: {0}")]
    Numeric(String),
    /// Not enough data to fit the requested statistic.
    #[error("fit error: {0}")]
    Fit(String),
    /// An empirical distribution needs at least one sample.
    #[error("empty sample")]
    EmptySample,
}

pub type Result<T> = std::result::Result<T, Error>;
