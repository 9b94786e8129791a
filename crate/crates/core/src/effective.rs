//! The M x M effective operator on a subspace basis: storage, spectrum, and
//! fidelity bookkeeping against a reference.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::dense::hermitian_eigenpairs;
use crate::error::{Result, SwtError};

/// Hermitian block operator expressed in an ordered basis, with its spectrum.
///
/// Raw matrices are Hermitized by averaging with the conjugate transpose
/// before diagonalization; the size of that correction is recorded, so exact
/// pipelines can assert it is negligible while sampled ones can report it.
#[derive(Debug, Clone)]
pub struct EffectiveHamiltonian {
    matrix: Array2<Complex64>,
    basis_labels: Vec<String>,
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<Complex64>,
    fidelities: Option<Vec<f64>>,
    hermitize_residual: f64,
}

impl EffectiveHamiltonian {
    pub fn from_matrix(raw: Array2<Complex64>, basis_labels: Vec<String>) -> Result<Self> {
        let m = raw.nrows();
        if raw.ncols() != m || m == 0 {
            return Err(SwtError::Invalid(format!(
                "effective matrix must be square and non-empty, got {}x{}",
                raw.nrows(),
                raw.ncols()
            )));
        }
        if basis_labels.len() != m {
            return Err(SwtError::Invalid("one label per basis state required".into()));
        }
        let mut matrix = Array2::<Complex64>::zeros((m, m));
        let mut residual = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                let symmetrized = (raw[(i, j)] + raw[(j, i)].conj()) * 0.5;
                residual = residual.max((raw[(i, j)] - symmetrized).norm());
                matrix[(i, j)] = symmetrized;
            }
        }
        let (eigenvalues, eigenvectors) = hermitian_eigenpairs(&matrix)?;
        Ok(Self {
            matrix,
            basis_labels,
            eigenvalues,
            eigenvectors,
            fidelities: None,
            hermitize_residual: residual,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector columns, matching the eigenvalue order.
    pub fn eigenvectors(&self) -> &Array2<Complex64> {
        &self.eigenvectors
    }

    pub fn fidelities(&self) -> Option<&[f64]> {
        self.fidelities.as_deref()
    }

    pub fn hermitize_residual(&self) -> f64 {
        self.hermitize_residual
    }

    /// Per-eigenstate overlap with a reference spectrum, matched in ascending
    /// order. Within a degenerate reference cluster the overlap is taken
    /// against the whole cluster span, so an arbitrary rotation inside the
    /// cluster does not read as infidelity.
    pub fn fidelities_against(&mut self, reference: &Self, cluster_tol: f64) -> Result<()> {
        let m = self.dim();
        if reference.dim() != m {
            return Err(SwtError::RankMismatch { left: m, right: reference.dim() });
        }
        let clusters = cluster_ranges(reference.eigenvalues(), cluster_tol);
        let mut fidelities = Vec::with_capacity(m);
        for k in 0..m {
            let cluster = clusters
                .iter()
                .find(|r| r.contains(&k))
                .expect("every rank belongs to a cluster");
            let mut overlap = 0.0;
            for r in cluster.clone() {
                let mut dot = Complex64::new(0.0, 0.0);
                for row in 0..m {
                    dot += reference.eigenvectors[(row, r)].conj() * self.eigenvectors[(row, k)];
                }
                overlap += dot.norm_sqr();
            }
            fidelities.push(overlap);
        }
        self.fidelities = Some(fidelities);
        Ok(())
    }

    /// Serializable view with `[re, im]` entry pairs in row-major order.
    pub fn export(&self) -> HeffExport {
        HeffExport {
            dim: self.dim(),
            basis_labels: self.basis_labels.clone(),
            matrix: self.matrix.iter().map(|v| [v.re, v.im]).collect(),
            eigenvalues: self.eigenvalues.clone(),
            fidelities: self.fidelities.clone(),
            hermitize_residual: self.hermitize_residual,
        }
    }
}

/// Group ascending eigenvalue ranks into clusters whose adjacent gaps are
/// below the tolerance.
fn cluster_ranges(eigenvalues: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut ranges = Vec::new();
    let mut start = 0;
    for k in 1..=eigenvalues.len() {
        if k == eigenvalues.len() || eigenvalues[k] - eigenvalues[k - 1] > tol {
            ranges.push(start..k);
            start = k;
        }
    }
    ranges
}

#[derive(Debug, Clone, Serialize)]
pub struct HeffExport {
    pub dim: usize,
    pub basis_labels: Vec<String>,
    pub matrix: Vec<[f64; 2]>,
    pub eigenvalues: Vec<f64>,
    pub fidelities: Option<Vec<f64>>,
    pub hermitize_residual: f64,
}
