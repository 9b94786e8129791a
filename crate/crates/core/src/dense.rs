//! Exact dense-matrix engine: diagonalization, projectors, reflections, the
//! direct-rotation transformation and its effective Hamiltonian, plus the
//! block-coupling trace used to cross-check the variational cost.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Eigh, Inverse, UPLO};
use num_complex::Complex64;
use serde::Serialize;

use crate::effective::EffectiveHamiltonian;
use crate::error::{Result, SwtError};
use crate::model::{window_gap, SubspaceBasis};
use crate::pauli::PauliSum;
use crate::policy::NumericPolicy;
use crate::state::StateVector;

/// Square complex matrix on an n-qubit register (dimension `2^n`).
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n_qubits: usize,
    matrix: Array2<Complex64>,
}

impl DenseOperator {
    pub fn zeros(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self { n_qubits, matrix: Array2::zeros((dim, dim)) }
    }

    pub fn identity(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self { n_qubits, matrix: Array2::eye(dim) }
    }

    /// Wrap an existing matrix; the dimension must be `2^n_qubits` and all
    /// entries finite.
    pub fn from_matrix(n_qubits: usize, matrix: Array2<Complex64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(SwtError::Invalid(format!(
                "matrix is {}x{}, expected {dim}x{dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(SwtError::Invalid("matrix has non-finite entries".into()));
        }
        Ok(Self { n_qubits, matrix })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.matrix[(row, col)] = value;
    }

    pub fn add_assign_entry(&mut self, row: usize, col: usize, value: Complex64) {
        self.matrix[(row, col)] += value;
    }

    pub fn dot(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        Self { n_qubits: self.n_qubits, matrix: self.matrix.dot(&other.matrix) }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        Self { n_qubits: self.n_qubits, matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.n_qubits, other.n_qubits);
        Self { n_qubits: self.n_qubits, matrix: &self.matrix - &other.matrix }
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { n_qubits: self.n_qubits, matrix: self.matrix.mapv(|v| v * factor) }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Array2::zeros(self.matrix.raw_dim());
        for ((r, c), v) in self.matrix.indexed_iter() {
            out[(c, r)] = v.conj();
        }
        Self { n_qubits: self.n_qubits, matrix: out }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.diag().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Max entrywise deviation from the conjugate transpose.
    pub fn hermiticity_deviation(&self) -> f64 {
        let dim = self.dim();
        let mut worst = 0.0f64;
        for r in 0..dim {
            for c in r..dim {
                let d = (self.matrix[(r, c)] - self.matrix[(c, r)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Max entrywise deviation of `U^dagger U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        self.adjoint().dot(self).max_abs_diff(&Self::identity(self.n_qubits))
    }

    /// Integer power by repeated squaring.
    pub fn pow(&self, mut exponent: u64) -> Self {
        let mut result = Self::identity(self.n_qubits);
        let mut base = self.clone();
        while exponent > 0 {
            if exponent & 1 == 1 {
                result = result.dot(&base);
            }
            exponent >>= 1;
            if exponent > 0 {
                base = base.dot(&base);
            }
        }
        result
    }

    /// Matrix-vector product on a raw amplitude slice.
    pub fn apply_vec(&self, amps: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(amps.len(), self.dim());
        let v = Array1::from_vec(amps.to_vec());
        self.matrix.dot(&v).to_vec()
    }
}

/// Eigenvalues (ascending) and matching orthonormal eigenvector columns of a
/// Hermitian operator.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: Array2<Complex64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector columns, same order as the eigenvalues.
    pub fn eigenvectors(&self) -> &Array2<Complex64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> Vec<Complex64> {
        self.eigenvectors.column(k).to_vec()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues. Ties are kept in
/// the solver's output order and the columns are re-orthonormalized by a
/// modified Gram-Schmidt pass in that order, which pins the result for
/// degenerate clusters.
pub fn eigh(operator: &DenseOperator, policy: &NumericPolicy) -> Result<SpectralDecomposition> {
    let deviation = operator.hermiticity_deviation();
    if deviation > policy.hermiticity {
        return Err(SwtError::NotHermitian { deviation });
    }
    let (values, vectors) = hermitian_eigenpairs(operator.matrix())?;
    Ok(SpectralDecomposition { eigenvalues: values, eigenvectors: vectors })
}

/// Shared Hermitian solver wrapper: ascending eigenvalues with true
/// eigenvector columns (the LAPACK binding hands back their conjugates for
/// complex input), re-orthonormalized in output order.
pub(crate) fn hermitian_eigenpairs(
    matrix: &Array2<Complex64>,
) -> Result<(Vec<f64>, Array2<Complex64>)> {
    let (values, vectors) = matrix
        .eigh(UPLO::Lower)
        .map_err(|e| SwtError::Eigensolver(e.to_string()))?;
    let mut vectors = vectors.mapv(|v| v.conj());
    gram_schmidt_columns(&mut vectors);
    Ok((values.to_vec(), vectors))
}

fn gram_schmidt_columns(m: &mut Array2<Complex64>) {
    let (rows, cols) = m.dim();
    for c in 0..cols {
        for prev in 0..c {
            let mut overlap = Complex64::new(0.0, 0.0);
            for r in 0..rows {
                overlap += m[(r, prev)].conj() * m[(r, c)];
            }
            for r in 0..rows {
                let correction = overlap * m[(r, prev)];
                m[(r, c)] -= correction;
            }
        }
        let norm: f64 = (0..rows).map(|r| m[(r, c)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in 0..rows {
                m[(r, c)] /= Complex64::new(norm, 0.0);
            }
        }
    }
}

fn check_orthonormal_columns(cols: &[Vec<Complex64>], tol: f64) -> Result<()> {
    let mut worst = 0.0f64;
    for (i, a) in cols.iter().enumerate() {
        for (j, b) in cols.iter().enumerate().skip(i) {
            let overlap: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((overlap - Complex64::new(expected, 0.0)).norm());
        }
    }
    if worst > tol {
        return Err(SwtError::NotOrthonormal { deviation: worst });
    }
    Ok(())
}

/// Rank-M projector `sum_k |v_k><v_k|` from orthonormal columns.
pub fn projector_from_columns(
    n_qubits: usize,
    columns: &[Vec<Complex64>],
    policy: &NumericPolicy,
) -> Result<DenseOperator> {
    let dim = 1usize << n_qubits;
    for col in columns {
        if col.len() != dim {
            return Err(SwtError::DimensionMismatch { left: dim, right: col.len() });
        }
    }
    check_orthonormal_columns(columns, policy.orthonormality)?;
    let mut p = DenseOperator::zeros(n_qubits);
    for col in columns {
        for r in 0..dim {
            for c in 0..dim {
                p.add_assign_entry(r, c, col[r] * col[c].conj());
            }
        }
    }
    Ok(p)
}

/// Projector onto the span of a set of orthonormal states.
pub fn projector_from_states(
    states: &[StateVector],
    policy: &NumericPolicy,
) -> Result<DenseOperator> {
    let n = states
        .first()
        .map(|s| s.n_qubits())
        .ok_or_else(|| SwtError::Invalid("empty state set".into()))?;
    let columns: Vec<Vec<Complex64>> =
        states.iter().map(|s| s.amplitudes().to_vec()).collect();
    projector_from_columns(n, &columns, policy)
}

/// `R = 2P - I` for a projector `P`; squares to the identity.
pub fn reflection_from_projector(p: &DenseOperator) -> DenseOperator {
    p.scaled(Complex64::new(2.0, 0.0))
        .sub(&DenseOperator::identity(p.n_qubits()))
}

fn validate_projector(p: &DenseOperator, policy: &NumericPolicy) -> Result<usize> {
    let herm = p.hermiticity_deviation();
    let idem = p.dot(p).max_abs_diff(p);
    let deviation = herm.max(idem);
    if deviation > policy.projector {
        return Err(SwtError::NotProjector { deviation });
    }
    let rank = p.trace().re.round();
    Ok(rank as usize)
}

/// The direct-rotation unitary `U = sqrt(R_0 R)` built from the reflections
/// through two rank-M projectors. The principal square root is taken: every
/// eigenvalue of `U` has argument in `(-pi/2, pi/2]`, so `U -> I` as the two
/// subspaces approach each other. `U` maps the range of `p` onto the range of
/// `p0` and likewise for the complements.
pub fn direct_rotation(
    p0: &DenseOperator,
    p: &DenseOperator,
    policy: &NumericPolicy,
) -> Result<DenseOperator> {
    let rank0 = validate_projector(p0, policy)?;
    let rank = validate_projector(p, policy)?;
    if rank0 != rank {
        return Err(SwtError::RankMismatch { left: rank0, right: rank });
    }
    let w = reflection_from_projector(p0).dot(&reflection_from_projector(p));
    let u = principal_unitary_sqrt(&w, policy)?;
    let deviation = u.unitarity_deviation();
    if deviation > policy.unitarity {
        return Err(SwtError::NotUnitary { deviation });
    }
    Ok(u)
}

/// Principal square root of a unitary matrix via its eigendecomposition.
/// Rejects eigenphases within the guard band of the branch cut at pi.
pub fn principal_unitary_sqrt(
    w: &DenseOperator,
    policy: &NumericPolicy,
) -> Result<DenseOperator> {
    let (values, vectors) = w
        .matrix()
        .eig()
        .map_err(|e| SwtError::Eigensolver(e.to_string()))?;
    for v in values.iter() {
        let theta = v.arg();
        if std::f64::consts::PI - theta.abs() < policy.branch_guard {
            return Err(SwtError::BranchAmbiguity { guard: policy.branch_guard });
        }
    }
    let half: Array1<Complex64> =
        values.mapv(|v| Complex64::from_polar(1.0, v.arg() / 2.0));
    let inverse = vectors
        .inv()
        .map_err(|e| SwtError::Eigensolver(e.to_string()))?;
    let mut scaled = vectors.clone();
    for (c, phase) in half.iter().enumerate() {
        for r in 0..scaled.nrows() {
            scaled[(r, c)] *= *phase;
        }
    }
    DenseOperator::from_matrix(w.n_qubits(), scaled.dot(&inverse))
}

/// Closest unitary in Frobenius norm: the unitary factor `A (A^dag A)^(-1/2)`
/// of the polar decomposition. Rejects singular input.
pub fn closest_unitary(a: &DenseOperator, policy: &NumericPolicy) -> Result<DenseOperator> {
    let gram = a.adjoint().dot(a);
    let (values, vectors) = hermitian_eigenpairs(gram.matrix())?;
    if values[0] <= 1e-12 {
        return Err(SwtError::Invalid(
            "operator is singular; no unitary polar factor".into(),
        ));
    }
    let dim = a.dim();
    let mut inverse_root = Array2::<Complex64>::zeros((dim, dim));
    for (k, lambda) in values.iter().enumerate() {
        let weight = Complex64::new(1.0 / lambda.sqrt(), 0.0);
        for r in 0..dim {
            let left = vectors[(r, k)] * weight;
            for c in 0..dim {
                inverse_root[(r, c)] += left * vectors[(c, k)].conj();
            }
        }
    }
    let unitary = a.matrix().dot(&inverse_root);
    let out = DenseOperator::from_matrix(a.n_qubits(), unitary)?;
    let deviation = out.unitarity_deviation();
    if deviation > policy.unitarity {
        return Err(SwtError::NotUnitary { deviation });
    }
    Ok(out)
}

/// `exp(-i H t)` for Hermitian `H`, through the eigendecomposition.
pub fn hermitian_evolution(
    h: &DenseOperator,
    t: f64,
    policy: &NumericPolicy,
) -> Result<DenseOperator> {
    let decomp = eigh(h, policy)?;
    let dim = h.dim();
    let v = decomp.eigenvectors();
    let mut out = Array2::<Complex64>::zeros((dim, dim));
    for (k, lambda) in decomp.eigenvalues().iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -lambda * t);
        for r in 0..dim {
            let left = v[(r, k)] * phase;
            for c in 0..dim {
                out[(r, c)] += left * v[(c, k)].conj();
            }
        }
    }
    DenseOperator::from_matrix(h.n_qubits(), out)
}

/// Compress `U H U^dagger` to the given basis: the M x M matrix with entries
/// `<phi_i| U H U^dagger |phi_j>`, diagonalized into an
/// [`EffectiveHamiltonian`].
pub fn effective_hamiltonian(
    h: &DenseOperator,
    u: &DenseOperator,
    basis: &SubspaceBasis,
    policy: &NumericPolicy,
) -> Result<EffectiveHamiltonian> {
    let deviation = u.unitarity_deviation();
    if deviation > policy.unitarity {
        return Err(SwtError::NotUnitary { deviation });
    }
    let rotated = u.dot(h).dot(&u.adjoint());
    let m = basis.dim();
    let mut matrix = Array2::<Complex64>::zeros((m, m));
    for j in 0..m {
        let col = rotated.apply_vec(basis.state(j).amplitudes());
        for i in 0..m {
            let amp: Complex64 = basis
                .state(i)
                .amplitudes()
                .iter()
                .zip(col.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            matrix[(i, j)] = amp;
        }
    }
    EffectiveHamiltonian::from_matrix(matrix, basis.labels().to_vec())
}

/// Advisory gap check for a perturbed window.
#[derive(Debug, Clone, Serialize)]
pub struct GapReport {
    /// Unperturbed gap around the chosen window.
    pub gap: f64,
    /// Operator norm of the scaled perturbation.
    pub v_norm: f64,
    /// Whether the perturbation norm is below half the gap. Advisory only.
    pub condition_met: bool,
}

/// Compare the unperturbed window gap of `h0` against the operator norm of
/// `epsilon * v`. The check never blocks a computation; small benchmark
/// instances are known to violate it and still transform cleanly.
pub fn gap_report(
    h0: &PauliSum,
    v: &PauliSum,
    epsilon: f64,
    k: usize,
    m: usize,
    policy: &NumericPolicy,
) -> Result<GapReport> {
    let h0_dense = h0.to_dense(policy)?;
    let spectrum = eigh(&h0_dense, policy)?;
    let gap = window_gap(spectrum.eigenvalues(), k, m, policy)?;
    let v_dense = v.to_dense(policy)?;
    let v_spectrum = eigh(&v_dense, policy)?;
    let v_norm = epsilon.abs()
        * v_spectrum
            .eigenvalues()
            .iter()
            .map(|e| e.abs())
            .fold(0.0, f64::max);
    Ok(GapReport { gap, v_norm, condition_met: v_norm < gap / 2.0 })
}

/// Mean squared coupling between a rank-M block and its complement:
/// `(1/M) Tr[(PHQ)(QHP)]` with `Q = I - P`. Non-negative, and zero exactly
/// when `H` has no matrix elements connecting the two blocks.
pub fn block_coupling(h: &DenseOperator, p: &DenseOperator, m: usize) -> f64 {
    let q = DenseOperator::identity(p.n_qubits()).sub(p);
    let phq = p.dot(h).dot(&q);
    phq.frobenius_norm_sq() / m as f64
}
