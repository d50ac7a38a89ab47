//! Crate-wide error type.

use alloc::string::String;

/// Errors raised by simulator and estimator operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{n} qubits exceeds the dense-simulation cap of {cap}")]
    TooManyQubits { n: usize, cap: usize },

    #[error("matrix is not Hermitian (residual {residual:e})")]
    NotHermitian { residual: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid probability {0}")]
    InvalidProbability(f64),

    #[error("boosted fault probability {effective} at location {location} is not below 1")]
    NoiseScaleTooLarge { location: usize, effective: f64 },

    #[error("operation requires a single-Pauli observable")]
    CompositeObservable,

    #[error("singular or near-singular matrix: {0}")]
    Singular(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergent { iterations: usize, residual: f64 },

    #[error("quasiprobability mix has no terms")]
    EmptyMix,

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },

    #[error("gate at location {location} is not Clifford")]
    NonCliffordGate { location: usize },

    #[error("observable and symmetry do not qubit-wise commute; use post-processing mode")]
    NotQubitwiseCommuting,

    #[error("exact enumeration of {branches} basis sequences exceeds the cap of {cap}")]
    EnumerationTooLarge { branches: usize, cap: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
