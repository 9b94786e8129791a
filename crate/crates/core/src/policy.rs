//! Centralized numeric tolerances.
//!
//! Every contract check in the crate reads its threshold from [`NumericPolicy`]
//! so that a run can tighten or relax them in one place. The defaults are sized
//! for double precision at desk scale (a few hundred basis states).

use serde::{Deserialize, Serialize};

/// Coefficient magnitude below which a Pauli-sum term is dropped after merging.
pub const COEFFICIENT_DROP: f64 = 1e-12;

/// Tolerances enforced by the dense engine and the model constructors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Max entrywise deviation from `A = A^dagger` accepted by the eigensolver.
    pub hermiticity: f64,
    /// Max entrywise deviation from `U^dagger U = I` accepted for unitaries.
    pub unitarity: f64,
    /// Max pairwise overlap deviation accepted for orthonormal state sets.
    pub orthonormality: f64,
    /// Max entrywise deviation from `P^2 = P`, `P = P^dagger` for projectors.
    pub projector: f64,
    /// Guard band around the eigenphase pi when taking the square root of a
    /// reflection product.
    pub branch_guard: f64,
    /// Minimal spectral gap above a ground state before it is treated as
    /// degenerate.
    pub degeneracy_gap: f64,
    /// Minimal gap at an energy-window boundary before the window is rejected
    /// as ambiguous.
    pub window_boundary: f64,
    /// Largest qubit count for which `2^n x 2^n` dense matrices are allocated.
    pub dense_qubit_cap: usize,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            hermiticity: 1e-10,
            unitarity: 1e-9,
            orthonormality: 1e-10,
            projector: 1e-10,
            branch_guard: 1e-6,
            degeneracy_gap: 1e-8,
            window_boundary: 1e-10,
            dense_qubit_cap: 12,
        }
    }
}
