//! QAOA with a complete-graph XY mixer, simulated inside the Hamming-weight-K
//! subspace.
//!
//! The Dicke initial state, the XY mixer and the diagonal cost Hamiltonian all
//! conserve Hamming weight, so the state never leaves the `C(n, k)` block and
//! the full `2^n` space is never materialized.

mod basis;
mod mixer;
mod optimize;
mod sim;

pub use basis::{dicke_state, enumerate_basis, SubspaceBasis, SubspaceState, MAX_QUBITS};
pub use mixer::{mixer_matrix, mixer_spectrum, spectrum_for, MixerSpectrum};
pub use optimize::{
    adam_optimize, depth_sweep, readout, readout_or_argmax, trotter_init, Candidate, DepthDiagnostic,
    OptimizerTrace, QaoaConfig, QaoaContext, QaoaParams, SweepResult,
};
pub use sim::{apply_cost_phase, apply_mixer, cost_diagonal, expectation, gradient, qaoa_state, value_and_gradient};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QaoaError {
    #[error("subspace C({n},{k}) is outside the supported range")]
    TooLarge { n: usize, k: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("no basis string reaches probability {threshold}")]
    EmptyReadout { threshold: f64 },
    #[error("numeric failure: {0}")]
    Numeric(String),
}
