use std::time::Duration;

use thiserror::Error;

/// Outcome of an iterative linear solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final true relative residual `|b - A x| / |b|`.
    pub residual: f64,
    pub wall_time: Duration,
}

#[derive(Debug, Error)]
pub enum CutFemError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("level set has no negative values on the background mesh")]
    EmptyDomain,

    #[error("quadrature order {requested} not supported (maximum {max})")]
    UnsupportedOrder { requested: usize, max: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("unusable geometry: {0}")]
    UnusableGeometry(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported operation: {0}")]
    UnsupportedOperation(String),

    #[error(
        "solver did not converge after {} iterations (residual {:e})",
        .report.iterations,
        .report.residual
    )]
    NonConvergence { report: SolveReport },

    #[error("eigenvalue iteration did not converge after {iterations} steps")]
    EigenNonConvergence { iterations: usize },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T, E = CutFemError> = std::result::Result<T, E>;
