//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by contract checks and invalid inputs.
#[derive(Debug, Error)]
pub enum SwtError {
    #[error("qubit count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dense materialization of {qubits} qubits exceeds the cap of {cap}")]
    ResourceCap { qubits: usize, cap: usize },

    #[error("chain model requires at least 4 spins, got {0}")]
    ModelTooSmall(usize),

    #[error("middle-chain ground state is degenerate (gap {gap:.3e})")]
    DegenerateGroundState { gap: f64 },

    #[error("energy window touches a degenerate boundary (gap {gap:.3e})")]
    AmbiguousWindow { gap: f64 },

    #[error("window [{k}, {k} + {m}) does not fit in dimension {dim}")]
    WindowOutOfRange { k: usize, m: usize, dim: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("states are not orthonormal (max deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("matrix is not a projector (max deviation {deviation:.3e})")]
    NotProjector { deviation: f64 },

    #[error("subspace dimensions differ: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },

    #[error("reflection product has an eigenphase within {guard:.1e} of the branch cut at pi")]
    BranchAmbiguity { guard: f64 },

    #[error("spectral range is degenerate; cannot schedule the evolution time")]
    DegenerateSpectrum,

    #[error("threshold energy {threshold} lies outside the open spectral range ({min}, {max})")]
    ThresholdOutsideSpectrum { threshold: f64, min: f64, max: f64 },

    #[error("no recorded symmetry relation maps basis state {i} to {j}")]
    MissingGRelation { i: usize, j: usize },

    #[error("parameter vector has length {got}, circuit expects {expected}")]
    ParameterLength { got: usize, expected: usize },

    #[error("eigensolver failure: {0}")]
    Eigensolver(String),

    #[error("invalid state preparation: {0}")]
    InvalidPrep(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, SwtError>;
