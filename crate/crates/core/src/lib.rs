//! Low-energy effective Hamiltonians by block-diagonalizing unitary
//! transformations, computed three ways and cross-validated:
//!
//! - an exact dense engine that builds the direct-rotation unitary
//!   `sqrt(R_0 R)` from reflections through the unperturbed and perturbed
//!   low-energy projectors ([`dense`]);
//! - a simulated phase-estimation pipeline that realizes the same reflection
//!   and square root through an ancilla register ([`qpe`]);
//! - a hybrid variational loop that trains a Pauli-exponential circuit to
//!   minimize the coupling between the subspace and its complement
//!   ([`vqa`], [`spsa`], [`ansatz`]).
//!
//! [`pauli`] provides the exact string algebra, [`state`] the statevector
//! simulator with optional shot sampling, and [`model`] the benchmark
//! spin chains these pipelines are validated on.

pub mod ansatz;
pub mod dense;
pub mod effective;
pub mod error;
pub mod model;
pub mod pauli;
pub mod policy;
pub mod qpe;
pub mod spsa;
pub mod state;
pub mod vqa;

pub use effective::EffectiveHamiltonian;
pub use error::{Result, SwtError};
pub use policy::NumericPolicy;
