use thiserror::Error;

/// Errors raised by the model-uncertainty engine.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A matrix that must be positive definite is not, is near-singular, or a
    /// value left its numerical domain (overflow, non-finite input).
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    /// The design matrix for a model lost full column rank.
    #[error("design matrix is rank deficient; offending columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    /// Enumeration was requested for a model space that is too large.
    #[error("model space with {requested} covariates exceeds the enumeration cap of {cap}; use the reversible-jump sampler instead")]
    Capacity { requested: usize, cap: usize },

    /// A model-space or factor specification is malformed.
    #[error("specification error: {0}")]
    Specification(String),

    /// An operation was called outside of its contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Newton iterations did not converge.
    #[error("no convergence after {iterations} iterations (last iterate {last:?})")]
    NonConvergence { iterations: usize, last: Vec<f64> },

    /// The data do not admit a finite estimate (zero fitted margin).
    #[error("degenerate data: {0}")]
    DegenerateData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
