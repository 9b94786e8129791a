//! Deterministic n-qubit statevector simulation: state preparation,
//! Pauli-exponential gates, controlled dense evolution, and expectation
//! estimation with optional sampling noise.
//!
//! Indexing convention: qubit 1 is the most significant bit of the amplitude
//! index, matching the text order of Pauli strings.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dense::DenseOperator;
use crate::error::{Result, SwtError};
use crate::model::SubspaceBasis;
use crate::pauli::PauliString;

/// Normalized pure state of an n-qubit register.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Computational basis state `|index>`.
    pub fn computational(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(SwtError::InvalidPrep(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Basis state from a bitstring such as `"0101"`, qubit 1 first.
    pub fn from_bitstring(bits: &str) -> Result<Self> {
        let n = bits.len();
        if n == 0 || n > 24 {
            return Err(SwtError::InvalidPrep(format!("bad bitstring length {n}")));
        }
        let mut index = 0usize;
        for c in bits.chars() {
            index <<= 1;
            match c {
                '0' => {}
                '1' => index |= 1,
                other => {
                    return Err(SwtError::InvalidPrep(format!(
                        "bitstring may only contain 0 and 1, got '{other}'"
                    )))
                }
            }
        }
        Self::computational(n, index)
    }

    /// Wrap amplitudes that are already normalized (to 1e-10).
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1usize << n_qubits {
            return Err(SwtError::DimensionMismatch {
                left: 1usize << n_qubits,
                right: amps.len(),
            });
        }
        let norm_sq: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm_sq.sqrt() - 1.0).abs() > 1e-10 {
            return Err(SwtError::InvalidPrep(format!(
                "amplitudes have norm {}, expected 1",
                norm_sq.sqrt()
            )));
        }
        Ok(Self { n_qubits, amps })
    }

    /// Normalize raw amplitudes, returning the state and the original norm.
    pub fn normalized_from(n_qubits: usize, mut amps: Vec<Complex64>) -> Result<(Self, f64)> {
        if amps.len() != 1usize << n_qubits {
            return Err(SwtError::DimensionMismatch {
                left: 1usize << n_qubits,
                right: amps.len(),
            });
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-14 {
            return Err(SwtError::InvalidPrep("cannot normalize the zero vector".into()));
        }
        let inv = Complex64::new(1.0 / norm, 0.0);
        for a in amps.iter_mut() {
            *a *= inv;
        }
        Ok((Self { n_qubits, amps }, norm))
    }

    /// Wrap amplitudes without a norm check, for internal pipelines that keep
    /// unitarity by construction.
    pub(crate) fn from_raw_parts(n_qubits: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1usize << n_qubits);
        Self { n_qubits, amps }
    }

    pub(crate) fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_same_size(&self, n: usize) -> Result<()> {
        if self.n_qubits != n {
            return Err(SwtError::DimensionMismatch { left: self.n_qubits, right: n });
        }
        Ok(())
    }

    /// `<self|other>`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_same_size(other.n_qubits)?;
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `sigma |self>` for a Pauli string (a permutation with phases).
    pub fn apply_pauli(&self, sigma: &PauliString) -> Result<Self> {
        self.check_same_size(sigma.n_qubits())?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (col, amp) in self.amps.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let (row, value) = sigma.column_action(col);
            out[row] = value * amp;
        }
        Ok(Self { n_qubits: self.n_qubits, amps: out })
    }

    /// `exp(i sigma angle / 2) |self> = cos(angle/2) |self> + i sin(angle/2) sigma |self>`.
    pub fn apply_pauli_rotation(&self, sigma: &PauliString, angle: f64) -> Result<Self> {
        self.check_same_size(sigma.n_qubits())?;
        let c = Complex64::new((angle / 2.0).cos(), 0.0);
        let s = Complex64::new(0.0, (angle / 2.0).sin());
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (col, amp) in self.amps.iter().enumerate() {
            let (row, value) = sigma.column_action(col);
            out[col] += c * amp;
            out[row] += s * value * amp;
        }
        Ok(Self { n_qubits: self.n_qubits, amps: out })
    }

    /// Exact `<self| sigma |self>`; real because Pauli strings are Hermitian.
    pub fn pauli_expectation(&self, sigma: &PauliString) -> Result<f64> {
        self.check_same_size(sigma.n_qubits())?;
        let mut total = Complex64::new(0.0, 0.0);
        for (col, amp) in self.amps.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let (row, value) = sigma.column_action(col);
            total += self.amps[row].conj() * value * amp;
        }
        Ok(total.re)
    }

    /// Apply a dense operator assumed unitary; the result stays normalized up
    /// to the operator's own unitarity deviation.
    pub fn apply_unitary(&self, u: &DenseOperator) -> Result<Self> {
        self.check_same_size(u.n_qubits())?;
        let amps = u.apply_vec(&self.amps);
        Ok(Self { n_qubits: self.n_qubits, amps })
    }

    /// The controlled-power ladder `sum_x |x><x| (x) U^f(x)` on a register of
    /// `l + n` qubits, where the first `l` qubits are ancillas and
    /// `f(x) = sum of powers[q] over the set bits of x` (ancilla qubit `q`
    /// counts from the top). With `powers = [2^(l-1), ..., 2, 1]` this is
    /// `U^x`.
    pub fn apply_dense_controlled(&self, u: &DenseOperator, powers: &[u64]) -> Result<Self> {
        let l = powers.len();
        let n = u.n_qubits();
        if self.n_qubits != l + n {
            return Err(SwtError::DimensionMismatch { left: self.n_qubits, right: l + n });
        }
        let deviation = u.unitarity_deviation();
        if deviation > 1e-10 {
            return Err(SwtError::NotUnitary { deviation });
        }
        let data_dim = 1usize << n;
        let anc_dim = 1usize << l;
        let mut amps = self.amps.clone();
        for (q, power) in powers.iter().enumerate() {
            let controlled = u.pow(*power);
            let anc_bit = 1usize << (l - 1 - q);
            for anc in 0..anc_dim {
                if anc & anc_bit == 0 {
                    continue;
                }
                let offset = anc * data_dim;
                let block = controlled.apply_vec(&amps[offset..offset + data_dim]);
                amps[offset..offset + data_dim].copy_from_slice(&block);
            }
        }
        Ok(Self { n_qubits: self.n_qubits, amps })
    }
}

/// Shot budget and noise knobs for expectation estimation. All randomness
/// flows from ChaCha8 streams keyed by `rng_seed`, which pins results
/// bit-for-bit across platforms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShotPlan {
    pub shots: ShotCount,
    pub rng_seed: u64,
    pub readout_flip_prob: f64,
    pub pauli_error_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShotCount {
    /// No sampling: expectations are exact inner products.
    Exact,
    Sampled(u64),
}

impl ShotPlan {
    pub fn exact() -> Self {
        Self { shots: ShotCount::Exact, rng_seed: 0, readout_flip_prob: 0.0, pauli_error_prob: 0.0 }
    }

    pub fn sampled(shots: u64, rng_seed: u64) -> Result<Self> {
        if shots == 0 {
            return Err(SwtError::Invalid("shot count must be positive".into()));
        }
        Ok(Self { shots: ShotCount::Sampled(shots), rng_seed, readout_flip_prob: 0.0, pauli_error_prob: 0.0 })
    }

    pub fn with_readout_flip(mut self, prob: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&prob) {
            return Err(SwtError::Invalid(format!(
                "readout flip probability {prob} outside [0, 0.5)"
            )));
        }
        self.readout_flip_prob = prob;
        Ok(self)
    }

    pub fn with_pauli_error(mut self, prob: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&prob) {
            return Err(SwtError::Invalid(format!(
                "gate error probability {prob} outside [0, 1)"
            )));
        }
        self.pauli_error_prob = prob;
        Ok(self)
    }

    pub fn is_exact(&self) -> bool {
        self.shots == ShotCount::Exact
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed)
    }

    /// Independent stream of the seeded generator, for fan-out over tuples.
    pub fn rng_stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(stream);
        rng
    }
}

/// Sign of the symmetry superposition `(|phi> +/- G|phi>)/sqrt(2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

/// Recipes for the states the measurement pipeline prepares.
pub enum StatePrep<'a> {
    /// Computational basis state from a bitstring, qubit 1 first.
    Bitstring(&'a str),
    /// The i-th recorded basis state.
    BasisMember(&'a SubspaceBasis, usize),
    /// Normalized `(|phi_i> +/- G|phi_i>)/sqrt(2)`; `g` must be one of the
    /// basis' recorded relations out of state `i`.
    GSuperposition { basis: &'a SubspaceBasis, i: usize, g: &'a PauliString, sign: Sign },
}

/// A prepared state plus the norm of its unnormalized `(I +/- G)/2` form
/// (1 for direct preparations).
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: StateVector,
    pub norm_factor: f64,
}

pub fn prepare_state(prep: &StatePrep<'_>) -> Result<PreparedState> {
    match prep {
        StatePrep::Bitstring(bits) => Ok(PreparedState {
            state: StateVector::from_bitstring(bits)?,
            norm_factor: 1.0,
        }),
        StatePrep::BasisMember(basis, i) => {
            if *i >= basis.dim() {
                return Err(SwtError::InvalidPrep(format!(
                    "basis index {i} out of range for dimension {}",
                    basis.dim()
                )));
            }
            Ok(PreparedState { state: basis.state(*i).clone(), norm_factor: 1.0 })
        }
        StatePrep::GSuperposition { basis, i, g, sign } => {
            if *i >= basis.dim() {
                return Err(SwtError::InvalidPrep(format!(
                    "basis index {i} out of range for dimension {}",
                    basis.dim()
                )));
            }
            let known = basis
                .g_relations()
                .iter()
                .any(|((from, _), rel)| from == i && rel == *g);
            if !known {
                return Err(SwtError::InvalidPrep(format!(
                    "string {} is not a recorded relation out of state {i}",
                    g
                )));
            }
            let phi = basis.state(*i);
            let flipped = phi.apply_pauli(g)?;
            let s = match sign {
                Sign::Plus => 1.0,
                Sign::Minus => -1.0,
            };
            let raw: Vec<Complex64> = phi
                .amplitudes()
                .iter()
                .zip(flipped.amplitudes().iter())
                .map(|(a, b)| (a + s * b) * 0.5)
                .collect();
            let (state, norm_factor) = StateVector::normalized_from(phi.n_qubits(), raw)?;
            Ok(PreparedState { state, norm_factor })
        }
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Apply a 2x2 gate to one qubit (1-based) of a raw amplitude vector.
fn apply_one_qubit_gate(
    amps: &mut [Complex64],
    n_qubits: usize,
    qubit: usize,
    gate: [[Complex64; 2]; 2],
) {
    let stride = 1usize << (n_qubits - qubit);
    let dim = amps.len();
    let mut base = 0;
    while base < dim {
        for offset in base..base + stride {
            let a = amps[offset];
            let b = amps[offset + stride];
            amps[offset] = gate[0][0] * a + gate[0][1] * b;
            amps[offset + stride] = gate[1][0] * a + gate[1][1] * b;
        }
        base += 2 * stride;
    }
}

/// Rotate every non-identity letter of `sigma` to the Z basis, mirroring how
/// hardware measures an arbitrary Pauli: H for X, then S^dagger H for Y.
fn rotate_to_z_basis(state: &StateVector, sigma: &PauliString) -> Vec<Complex64> {
    let n = state.n_qubits();
    let mut amps = state.amplitudes().to_vec();
    let h = {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        [[s, s], [s, -s]]
    };
    let sdg = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(0.0, -1.0)],
    ];
    for q in 1..=n {
        match sigma.letter(q) {
            crate::pauli::PauliLetter::X => apply_one_qubit_gate(&mut amps, n, q, h),
            crate::pauli::PauliLetter::Y => {
                apply_one_qubit_gate(&mut amps, n, q, sdg);
                apply_one_qubit_gate(&mut amps, n, q, h);
            }
            _ => {}
        }
    }
    amps
}

/// Sample a +/-1 mean for `sigma` on `state` from the exact outcome
/// distribution, flipping each measured bit independently with
/// `readout_flip_prob`. Draws only from `rng`, so derived streams stay
/// reproducible; nothing is drawn for flips when the probability is zero.
pub fn sample_pauli_expectation(
    state: &StateVector,
    sigma: &PauliString,
    shots: u64,
    readout_flip_prob: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if state.n_qubits() != sigma.n_qubits() {
        return Err(SwtError::DimensionMismatch {
            left: state.n_qubits(),
            right: sigma.n_qubits(),
        });
    }
    if sigma.is_identity() {
        return Ok(1.0);
    }
    let n = state.n_qubits();
    let rotated = rotate_to_z_basis(state, sigma);
    let mut cumulative = Vec::with_capacity(rotated.len());
    let mut acc = 0.0;
    for a in &rotated {
        acc += a.norm_sqr();
        cumulative.push(acc);
    }
    let total = acc;
    let support_bits: Vec<usize> =
        sigma.support().iter().map(|q| 1usize << (n - q)).collect();

    let mut sum = 0i64;
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * total;
        let mut index = cumulative.partition_point(|c| *c < u);
        if index >= rotated.len() {
            index = rotated.len() - 1;
        }
        if readout_flip_prob > 0.0 {
            for bit in &support_bits {
                if rng.gen::<f64>() < readout_flip_prob {
                    index ^= bit;
                }
            }
        }
        let parity = support_bits.iter().filter(|bit| index & **bit != 0).count();
        sum += if parity % 2 == 0 { 1 } else { -1 };
    }
    Ok(sum as f64 / shots as f64)
}

/// Estimate `<state| sigma |state>` under the plan: exactly, or as the mean of
/// sampled +/-1 outcomes. Deterministic for a given seed.
pub fn estimate_expectation(
    state: &StateVector,
    sigma: &PauliString,
    plan: &ShotPlan,
) -> Result<f64> {
    match plan.shots {
        ShotCount::Exact => state.pauli_expectation(sigma),
        ShotCount::Sampled(shots) => {
            let mut rng = plan.rng();
            sample_pauli_expectation(state, sigma, shots, plan.readout_flip_prob, &mut rng)
        }
    }
}
