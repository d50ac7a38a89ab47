//! Quantum error mitigation on an exact density-matrix simulator.
//!
//! The crate simulates small noisy circuits exactly (dense 2^N × 2^N states,
//! N ≤ 12) and implements the standard mitigation estimators on top of that
//! substrate: zero-noise extrapolation, probabilistic error cancellation,
//! readout inversion and unfolding, symmetry verification, subspace
//! expansion, purification (virtual distillation, echo verification,
//! McWeeny iteration) and learning-based rescale-and-shift. Every estimator
//! reports bias, variance and sampling overhead so the methods can be
//! compared against their closed-form cost predictions.
//!
//! `no_std` + `alloc` compatible; the companion CLI crate carries IO and
//! file formats.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod channel;
pub mod circuit;
pub mod error;
pub mod learn;
pub mod linalg;
pub mod matrix;
pub mod pauli;
pub mod pec;
pub mod purify;
pub mod readout;
pub mod rng;
pub mod state;
pub mod stats;
pub mod symx;
pub mod zne;

pub use channel::Channel;
pub use circuit::{Fault, Gate, Location, NoisyCircuit};
pub use error::{Error, Result};
pub use matrix::{CMatrix, RMatrix};
pub use pauli::{Observable, PauliString};
pub use rng::RngStream;
pub use state::{sample_shot, DensityMatrix};
pub use stats::EstimatorReport;

/// Whether an estimator runs from exact expectations or projective shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Expectations straight from the density matrix; isolates bias.
    Exact,
    /// Finite-shot Born-rule sampling.
    Sampled,
}
