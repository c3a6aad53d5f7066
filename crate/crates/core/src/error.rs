use alloc::string::String;

use crate::quantum::FactorLabel;

/// Errors raised by the simulation, measurement and estimation layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("cannot mix state vectors and density matrices in a tensor product")]
    MixedRepresentation,
    #[error("unknown factor label {0:?}")]
    UnknownLabel(FactorLabel),
    #[error("missing factor {0:?}")]
    MissingFactor(FactorLabel),
    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("schedule does not match parameters: {0}")]
    ScheduleMismatch(String),
    #[error("truncation leakage population {population:e} exceeds {limit:e}")]
    TruncationLeakage { population: f64, limit: f64 },
    #[error("cavity truncation too small: estimated displacement error {0:e}")]
    InsufficientTruncation(f64),
    #[error("all-zero matrix has no unit-trace normalization")]
    ZeroMatrix,
    #[error("negative time step {0}")]
    NegativeTime(f64),
    #[error("semidefinite program is infeasible (certificate residual {residual:e})")]
    Infeasible { residual: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
