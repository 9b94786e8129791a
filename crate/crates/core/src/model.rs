//! Benchmark spin-chain Hamiltonians and the unperturbed subspace bases they
//! are transformed against.
//!
//! The chain couples spins 2..N-1 with a uniform antiferromagnetic Heisenberg
//! interaction of strength 2; the two end spins are decoupled in the
//! unperturbed model and attach through a strength-1 perturbation. The
//! unperturbed ground space is then four-fold degenerate and spanned by
//! `|mu> (x) |GS> (x) |nu>` with `mu, nu` the free end spins.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::dense::{eigh, DenseOperator};
use crate::error::{Result, SwtError};
use crate::pauli::{PauliLetter, PauliString, PauliSum};
use crate::policy::NumericPolicy;
use crate::state::StateVector;

/// Chain size and perturbation strength of a benchmark instance.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModelSpec {
    pub n_spins: usize,
    pub epsilon: f64,
}

impl ModelSpec {
    pub fn new(n_spins: usize, epsilon: f64) -> Result<Self> {
        if n_spins < 4 {
            return Err(SwtError::ModelTooSmall(n_spins));
        }
        if !epsilon.is_finite() {
            return Err(SwtError::Invalid("epsilon must be finite".into()));
        }
        Ok(Self { n_spins, epsilon })
    }

    pub fn h0(&self) -> PauliSum {
        heisenberg_h0(self.n_spins).expect("validated size")
    }

    pub fn v(&self) -> PauliSum {
        heisenberg_v(self.n_spins).expect("validated size")
    }

    /// `H = H_0 + epsilon V`, merged to canonical form.
    pub fn hamiltonian(&self) -> PauliSum {
        self.h0()
            .add(&self.v().scaled(self.epsilon))
            .expect("matching sizes")
    }
}

fn heisenberg_links(n_spins: usize, pairs: &[(usize, usize)], coupling: f64) -> PauliSum {
    let mut terms = Vec::with_capacity(3 * pairs.len());
    for &(a, b) in pairs {
        for letter in [PauliLetter::X, PauliLetter::Y, PauliLetter::Z] {
            terms.push((coupling, PauliString::two_site(n_spins, a, b, letter)));
        }
    }
    PauliSum::from_terms(n_spins, terms).expect("well-formed links")
}

/// Decoupled-chain Hamiltonian: strength-2 Heisenberg links on nearest
/// neighbors among spins 2..n-1. Has `3 (n - 3)` terms.
pub fn heisenberg_h0(n_spins: usize) -> Result<PauliSum> {
    if n_spins < 4 {
        return Err(SwtError::ModelTooSmall(n_spins));
    }
    let pairs: Vec<(usize, usize)> = (2..=n_spins - 2).map(|i| (i, i + 1)).collect();
    Ok(heisenberg_links(n_spins, &pairs, 2.0))
}

/// End-spin perturbation: strength-1 Heisenberg links on (1,2) and (n-1,n).
/// Always 6 terms.
pub fn heisenberg_v(n_spins: usize) -> Result<PauliSum> {
    if n_spins < 4 {
        return Err(SwtError::ModelTooSmall(n_spins));
    }
    Ok(heisenberg_links(n_spins, &[(1, 2), (n_spins - 1, n_spins)], 1.0))
}

/// Ordered orthonormal basis of an unperturbed subspace, with the recorded
/// single-string symmetries `G` mapping one basis state onto another.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    n_qubits: usize,
    states: Vec<StateVector>,
    labels: Vec<String>,
    g_relations: BTreeMap<(usize, usize), PauliString>,
}

impl SubspaceBasis {
    pub fn new(
        states: Vec<StateVector>,
        labels: Vec<String>,
        g_relations: BTreeMap<(usize, usize), PauliString>,
    ) -> Result<Self> {
        let n_qubits = states
            .first()
            .map(|s| s.n_qubits())
            .ok_or_else(|| SwtError::Invalid("empty basis".into()))?;
        if states.iter().any(|s| s.n_qubits() != n_qubits) {
            return Err(SwtError::Invalid("basis states differ in size".into()));
        }
        if labels.len() != states.len() {
            return Err(SwtError::Invalid("one label per basis state required".into()));
        }
        Ok(Self { n_qubits, states, labels, g_relations })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of basis states M.
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, i: usize) -> &StateVector {
        &self.states[i]
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// The string `G` with `|phi_j> = G |phi_i>`, when recorded.
    pub fn g_relation(&self, i: usize, j: usize) -> Option<&PauliString> {
        self.g_relations.get(&(i, j))
    }

    pub fn g_relations(&self) -> &BTreeMap<(usize, usize), PauliString> {
        &self.g_relations
    }

    /// JSON-friendly view: amplitudes as `[re, im]` pairs.
    pub fn export(&self) -> BasisExport {
        BasisExport {
            n_qubits: self.n_qubits,
            labels: self.labels.clone(),
            states: self
                .states
                .iter()
                .map(|s| s.amplitudes().iter().map(|a| [a.re, a.im]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisExport {
    pub n_qubits: usize,
    pub labels: Vec<String>,
    pub states: Vec<Vec<[f64; 2]>>,
}

/// Fix the global phase of a raw vector so its first maximal-magnitude entry
/// is real and positive. Ties within a relative 1e-9 go to the lowest index.
fn phase_fix(amps: &mut [Complex64]) {
    let max_mag = amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
    if max_mag == 0.0 {
        return;
    }
    let anchor = amps
        .iter()
        .position(|a| a.norm() >= max_mag * (1.0 - 1e-9))
        .expect("nonzero vector has an anchor");
    let phase = amps[anchor] / Complex64::new(amps[anchor].norm(), 0.0);
    let correction = phase.conj();
    for a in amps.iter_mut() {
        *a *= correction;
    }
}

/// Four-state basis `|mu> (x) |GS> (x) |nu>` of the unperturbed ground space,
/// ordered `(mu, nu) = (0,0), (0,1), (1,0), (1,1)`. The middle-chain ground
/// state comes from dense diagonalization and must be non-degenerate.
///
/// Every ordered pair of distinct basis states is related by one of
/// `x_1`, `x_n`, `x_1 x_n`, recorded in the basis for measurement-side
/// decompositions.
pub fn ground_basis(n_spins: usize, policy: &NumericPolicy) -> Result<SubspaceBasis> {
    if n_spins < 4 {
        return Err(SwtError::ModelTooSmall(n_spins));
    }
    let mid_n = n_spins - 2;
    if mid_n > policy.dense_qubit_cap {
        return Err(SwtError::ResourceCap { qubits: mid_n, cap: policy.dense_qubit_cap });
    }
    // Middle chain re-indexed to qubits 1..mid_n.
    let pairs: Vec<(usize, usize)> = (1..mid_n).map(|i| (i, i + 1)).collect();
    let h_mid = heisenberg_links(mid_n, &pairs, 2.0);
    let decomp = eigh(&h_mid.to_dense(policy)?, policy)?;
    let gap = decomp.eigenvalues()[1] - decomp.eigenvalues()[0];
    if gap < policy.degeneracy_gap {
        return Err(SwtError::DegenerateGroundState { gap });
    }
    let mut gs = decomp.eigenvector(0);
    phase_fix(&mut gs);

    let full_dim = 1usize << n_spins;
    let mut states = Vec::with_capacity(4);
    let mut labels = Vec::with_capacity(4);
    for (mu, nu) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
        let mut amps = vec![Complex64::new(0.0, 0.0); full_dim];
        for (g, coeff) in gs.iter().enumerate() {
            // qubit 1 is the most significant bit, qubit n the least
            let index = (mu << (n_spins - 1)) | (g << 1) | nu;
            amps[index] = *coeff;
        }
        states.push(StateVector::from_amplitudes(n_spins, amps)?);
        labels.push(format!("{mu}{nu}"));
    }

    let order = [(0usize, 0usize), (0, 1), (1, 0), (1, 1)];
    let mut g_relations = BTreeMap::new();
    for (i, &(mu_i, nu_i)) in order.iter().enumerate() {
        for (j, &(mu_j, nu_j)) in order.iter().enumerate() {
            if i == j {
                continue;
            }
            let flip_left = mu_i != mu_j;
            let flip_right = nu_i != nu_j;
            let g = match (flip_left, flip_right) {
                (true, false) => PauliString::single(n_spins, 1, PauliLetter::X),
                (false, true) => PauliString::single(n_spins, n_spins, PauliLetter::X),
                (true, true) => PauliString::two_site(n_spins, 1, n_spins, PauliLetter::X),
                (false, false) => unreachable!(),
            };
            g_relations.insert((i, j), g);
        }
    }
    SubspaceBasis::new(states, labels, g_relations)
}

/// Gap around the eigenvalue window `[k, k+m)` of an ascending spectrum: the
/// smaller of the boundary gaps, with a missing branch (window at either end
/// of the spectrum) omitted. A whole-spectrum window has an infinite gap.
pub(crate) fn window_gap(
    eigenvalues: &[f64],
    k: usize,
    m: usize,
    policy: &NumericPolicy,
) -> Result<f64> {
    let dim = eigenvalues.len();
    if m == 0 || k + m > dim {
        return Err(SwtError::WindowOutOfRange { k, m, dim });
    }
    let mut gap = f64::INFINITY;
    if k > 0 {
        let lower = eigenvalues[k] - eigenvalues[k - 1];
        if lower < policy.window_boundary {
            return Err(SwtError::AmbiguousWindow { gap: lower });
        }
        gap = gap.min(lower);
    }
    if k + m < dim {
        let upper = eigenvalues[k + m] - eigenvalues[k + m - 1];
        if upper < policy.window_boundary {
            return Err(SwtError::AmbiguousWindow { gap: upper });
        }
        gap = gap.min(upper);
    }
    Ok(gap)
}

/// Basis of the M eigenvectors with eigenvalue ranks `k..k+m` of a Hermitian
/// operator, together with the window gap. No symmetry relations are
/// recorded for a generic window.
pub fn window_subspace(
    h0: &DenseOperator,
    k: usize,
    m: usize,
    policy: &NumericPolicy,
) -> Result<(SubspaceBasis, f64)> {
    let decomp = eigh(h0, policy)?;
    let gap = window_gap(decomp.eigenvalues(), k, m, policy)?;
    let mut states = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for rank in k..k + m {
        states.push(StateVector::from_amplitudes(
            h0.n_qubits(),
            decomp.eigenvector(rank),
        )?);
        labels.push(format!("E{rank}"));
    }
    Ok((SubspaceBasis::new(states, labels, BTreeMap::new())?, gap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::projector_from_states;
    use num_complex::Complex64 as C64;

    fn policy() -> NumericPolicy {
        NumericPolicy::default()
    }

    #[test]
    fn h0_term_structure() {
        let h0 = heisenberg_h0(4).unwrap();
        assert_eq!(h0.len(), 3);
        for (c, s) in h0.terms() {
            assert_eq!(*c, 2.0);
            assert_eq!(s.support(), vec![2, 3]);
        }
        let h0_5 = heisenberg_h0(5).unwrap();
        assert_eq!(h0_5.len(), 6);
        let supports: Vec<Vec<usize>> =
            h0_5.terms().iter().map(|(_, s)| s.support()).collect();
        assert!(supports.iter().all(|s| s == &vec![2, 3] || s == &vec![3, 4]));
    }

    #[test]
    fn h0_spectrum_n4() {
        let h0 = heisenberg_h0(4).unwrap().to_dense(&policy()).unwrap();
        let decomp = eigh(&h0, &policy()).unwrap();
        let low: Vec<f64> = decomp.eigenvalues()[..4].to_vec();
        let high: Vec<f64> = decomp.eigenvalues()[4..].to_vec();
        assert!(low.iter().all(|e| (e + 6.0).abs() < 1e-10));
        assert!(high.iter().all(|e| (e - 2.0).abs() < 1e-10));
    }

    #[test]
    fn v_term_structure() {
        for n in [4usize, 5, 6] {
            let v = heisenberg_v(n).unwrap();
            assert_eq!(v.len(), 6);
            for (c, s) in v.terms() {
                assert_eq!(*c, 1.0);
                let support = s.support();
                assert!(support == vec![1, 2] || support == vec![n - 1, n]);
            }
        }
    }

    #[test]
    fn v_operator_norm_n4() {
        let v = heisenberg_v(4).unwrap().to_dense(&policy()).unwrap();
        let decomp = eigh(&v, &policy()).unwrap();
        let norm = decomp.eigenvalues().iter().map(|e| e.abs()).fold(0.0, f64::max);
        assert!((norm - 6.0).abs() < 1e-10);
    }

    #[test]
    fn small_chains_are_rejected() {
        assert!(matches!(heisenberg_h0(3), Err(SwtError::ModelTooSmall(3))));
        assert!(matches!(heisenberg_v(2), Err(SwtError::ModelTooSmall(2))));
        assert!(ModelSpec::new(3, 1.0).is_err());
    }

    #[test]
    fn model_accepts_zero_epsilon() {
        let spec = ModelSpec::new(4, 0.0).unwrap();
        assert_eq!(spec.hamiltonian(), spec.h0());
    }

    #[test]
    fn spin_flip_symmetry() {
        // total spin flip X...X commutes with both model pieces
        let flip = PauliSum::from_terms(4, [(1.0, "XXXX".parse().unwrap())]).unwrap();
        assert!(heisenberg_h0(4).unwrap().hermitian_commutator(&flip).unwrap().is_empty());
        assert!(heisenberg_v(4).unwrap().hermitian_commutator(&flip).unwrap().is_empty());
    }

    #[test]
    fn ground_basis_n4_singlet() {
        let basis = ground_basis(4, &policy()).unwrap();
        assert_eq!(basis.dim(), 4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // |0> (x) (|01> - |10>)/sqrt2 (x) |0> lives at indices 0b0010, 0b0100
        let first = basis.state(0);
        assert!((first.amplitudes()[0b0010] - C64::new(s, 0.0)).norm() < 1e-12);
        assert!((first.amplitudes()[0b0100] + C64::new(s, 0.0)).norm() < 1e-12);
        let nonzero = first.amplitudes().iter().filter(|a| a.norm() > 1e-12).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn ground_basis_g_relations_match_end_flips() {
        let basis = ground_basis(4, &policy()).unwrap();
        let x1 = PauliString::single(4, 1, PauliLetter::X);
        let x4 = PauliString::single(4, 4, PauliLetter::X);
        let x14 = PauliString::two_site(4, 1, 4, PauliLetter::X);
        // six unordered pairs, spelled as in the measurement table
        let expected = [
            (0usize, 2usize, x1),
            (0, 1, x4),
            (0, 3, x14),
            (2, 1, x14),
            (2, 3, x4),
            (1, 3, x1),
        ];
        for (i, j, g) in expected {
            assert_eq!(basis.g_relation(i, j), Some(&g), "pair ({i},{j})");
            assert_eq!(basis.g_relation(j, i), Some(&g), "pair ({j},{i})");
            // G maps state i onto state j exactly
            let mapped = basis.state(i).apply_pauli(&g).unwrap();
            let overlap = basis.state(j).inner_product(&mapped).unwrap();
            assert!((overlap - C64::new(1.0, 0.0)).norm() < 1e-10);
            // and G is an involution
            let (phase, square) = g.product(&g).unwrap();
            assert!(square.is_identity());
            assert_eq!(phase, crate::pauli::Phase::PlusOne);
        }
    }

    #[test]
    fn ground_basis_n6_orthonormal_and_degenerate() {
        let p = policy();
        let basis = ground_basis(6, &p).unwrap();
        assert_eq!(basis.dim(), 4);
        for i in 0..4 {
            for j in 0..4 {
                let overlap = basis.state(i).inner_product(basis.state(j)).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((overlap - C64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
        // all four states share the middle-chain ground energy
        let h0 = heisenberg_h0(6).unwrap().to_dense(&p).unwrap();
        let mid = heisenberg_links(4, &[(1, 2), (2, 3), (3, 4)], 2.0);
        let mid_energy = eigh(&mid.to_dense(&p).unwrap(), &p).unwrap().min_eigenvalue();
        for i in 0..4 {
            let hv = h0.apply_vec(basis.state(i).amplitudes());
            let energy: C64 = basis
                .state(i)
                .amplitudes()
                .iter()
                .zip(hv.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            assert!((energy.re - mid_energy).abs() < 1e-9);
            // residual of the eigenpair
            let residual: f64 = hv
                .iter()
                .zip(basis.state(i).amplitudes().iter())
                .map(|(a, b)| (a - b * C64::new(mid_energy, 0.0)).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(residual < 1e-9);
        }
    }

    #[test]
    fn odd_middle_chain_is_degenerate() {
        // spins 2..4 of a 5-chain form a 3-site chain with a doublet ground state
        assert!(matches!(
            ground_basis(5, &policy()),
            Err(SwtError::DegenerateGroundState { .. })
        ));
    }

    #[test]
    fn window_gap_formula_on_explicit_diagonal() {
        let p = policy();
        let mut h = DenseOperator::zeros(2);
        for (k, e) in [0.0, 1.0, 3.0, 7.0].iter().enumerate() {
            h.set(k, k, C64::new(*e, 0.0));
        }
        let (basis, gap) = window_subspace(&h, 1, 2, &p).unwrap();
        assert!((gap - 1.0).abs() < 1e-12);
        assert_eq!(basis.dim(), 2);
        // middle two eigenvectors are the computational states 1 and 3... i.e.
        // eigenvalues 1 and 3 at indices 1 and 2
        assert!(basis.state(0).amplitudes()[1].norm() > 1.0 - 1e-9);
        assert!(basis.state(1).amplitudes()[2].norm() > 1.0 - 1e-9);
    }

    #[test]
    fn window_reduces_to_ground_gap_at_k0() {
        let p = policy();
        let h0 = heisenberg_h0(4).unwrap().to_dense(&p).unwrap();
        let (basis, gap) = window_subspace(&h0, 0, 4, &p).unwrap();
        assert!((gap - 8.0).abs() < 1e-9);
        // same span as the constructed ground basis
        let ground = ground_basis(4, &p).unwrap();
        let p_window = projector_from_states(basis.states(), &p).unwrap();
        let p_ground = projector_from_states(ground.states(), &p).unwrap();
        assert!(p_window.max_abs_diff(&p_ground) < 1e-9);
    }

    #[test]
    fn window_out_of_range_is_rejected() {
        let p = policy();
        let h0 = heisenberg_h0(4).unwrap().to_dense(&p).unwrap();
        assert!(matches!(
            window_subspace(&h0, 14, 4, &p),
            Err(SwtError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn window_on_degenerate_boundary_is_rejected() {
        let p = policy();
        let h0 = heisenberg_h0(4).unwrap().to_dense(&p).unwrap();
        // the low quadruplet is exactly degenerate, so splitting it is ambiguous
        assert!(matches!(
            window_subspace(&h0, 0, 2, &p),
            Err(SwtError::AmbiguousWindow { .. })
        ));
    }

    #[test]
    fn whole_spectrum_window_has_infinite_gap() {
        let p = policy();
        let h0 = heisenberg_h0(4).unwrap().to_dense(&p).unwrap();
        let (_, gap) = window_subspace(&h0, 0, 16, &p).unwrap();
        assert!(gap.is_infinite());
    }
}
