//! The hybrid pipeline: transition amplitudes between subspace states,
//! decoupling cost functions, and effective-Hamiltonian reconstruction.
//!
//! Two measurement backends are provided. `Exact` evaluates matrix elements
//! as inner products on the simulator. `GDecomposition` mirrors the hardware
//! recipe: diagonal elements are plain expectations in the transformed state,
//! and off-diagonal elements use the recorded symmetry `G` between basis
//! states to become a difference of two expectations in `(I +/- G)`
//! superposition states; only the real part survives that decomposition, and
//! the imaginary part is reported as zero by construction.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::ansatz::ParameterizedCircuit;
use crate::dense::{hermitian_evolution, DenseOperator};
use crate::effective::EffectiveHamiltonian;
use crate::error::{Result, SwtError};
use crate::model::SubspaceBasis;
use crate::pauli::{PauliString, PauliSum};
use crate::policy::NumericPolicy;
use crate::state::{
    prepare_state, sample_pauli_expectation, ShotCount, Sign, StatePrep, StateVector,
};

/// Eigenvalue gap below which reference eigenstates are treated as one
/// degenerate cluster when matching fidelities.
pub const SPECTRUM_CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeBackend {
    /// Inner products on the statevector.
    Exact,
    /// Expectation-value decomposition via the recorded G relations.
    GDecomposition,
}

/// Backend, shot plan, and optional pair subsampling for cost evaluation.
#[derive(Debug, Clone, Copy)]
pub struct CostConfig {
    pub backend: AmplitudeBackend,
    pub shot_plan: crate::state::ShotPlan,
    /// When set, the double sum over `(i, j)` pairs is estimated from this
    /// many uniform draws (with replacement) instead of all `M^2` terms.
    pub monte_carlo_pairs: Option<usize>,
}

impl CostConfig {
    pub fn exact() -> Self {
        Self {
            backend: AmplitudeBackend::Exact,
            shot_plan: crate::state::ShotPlan::exact(),
            monte_carlo_pairs: None,
        }
    }
}

/// The transformation whose adjoint is applied to basis states: either a
/// parameterized circuit at given angles, or an injected dense unitary (used
/// to feed the exact rotation through the measurement pipeline).
pub enum Transformation<'a> {
    Circuit { circuit: &'a ParameterizedCircuit, theta: &'a [f64] },
    Dense(&'a DenseOperator),
}

impl Transformation<'_> {
    fn apply_adjoint(&self, state: &StateVector) -> Result<StateVector> {
        match self {
            Transformation::Circuit { circuit, theta } => circuit.apply(state, theta, true),
            Transformation::Dense(u) => state.apply_unitary(&u.adjoint()),
        }
    }

    /// Adjoint application with stochastic gate noise; the injected dense
    /// transformation is treated as ideal.
    fn apply_adjoint_noisy(
        &self,
        state: &StateVector,
        error_prob: f64,
        rng: &mut rand_chacha::ChaCha8Rng,
    ) -> Result<StateVector> {
        match self {
            Transformation::Circuit { circuit, theta } => {
                circuit.apply_noisy(state, theta, true, error_prob, rng)
            }
            Transformation::Dense(u) => state.apply_unitary(&u.adjoint()),
        }
    }
}

/// Basis, Hamiltonian, and the symbolically expanded square, computed once.
pub struct CostContext<'a> {
    basis: &'a SubspaceBasis,
    hamiltonian: &'a PauliSum,
    h_squared: PauliSum,
}

impl<'a> CostContext<'a> {
    pub fn new(basis: &'a SubspaceBasis, hamiltonian: &'a PauliSum) -> Result<Self> {
        if basis.n_qubits() != hamiltonian.n_qubits() {
            return Err(SwtError::DimensionMismatch {
                left: basis.n_qubits(),
                right: hamiltonian.n_qubits(),
            });
        }
        let h_squared = hamiltonian.product(hamiltonian)?.into_real(1e-9)?;
        Ok(Self { basis, hamiltonian, h_squared })
    }

    pub fn basis(&self) -> &SubspaceBasis {
        self.basis
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        self.hamiltonian
    }

    pub fn h_squared(&self) -> &PauliSum {
        &self.h_squared
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream per `(i, j, sign, observable)` tuple, so fanned-out
/// estimates never share draws.
fn stream_id(i: usize, j: usize, sign: u64, sigma: &PauliString) -> u64 {
    let (x, z) = sigma.bit_masks();
    let coords = ((i as u64) << 40) ^ ((j as u64) << 20) ^ sign;
    splitmix64(coords ^ splitmix64(x) ^ splitmix64(z.rotate_left(17)))
}

const MC_PAIR_STREAM: u64 = u64::MAX;

/// Expectation of `sigma` in the transformed state `U^dagger |prep>`,
/// honoring the shot plan and gate-noise knob.
fn transformed_expectation(
    prep: &StateVector,
    transform: &Transformation<'_>,
    sigma: &PauliString,
    config: &CostConfig,
    stream: u64,
) -> Result<f64> {
    if sigma.is_identity() {
        return Ok(1.0);
    }
    match config.shot_plan.shots {
        ShotCount::Exact => {
            let state = transform.apply_adjoint(prep)?;
            state.pauli_expectation(sigma)
        }
        ShotCount::Sampled(shots) => {
            let mut rng = config.shot_plan.rng_stream(stream);
            let flip = config.shot_plan.readout_flip_prob;
            let error_prob = config.shot_plan.pauli_error_prob;
            if error_prob == 0.0 {
                let state = transform.apply_adjoint(prep)?;
                sample_pauli_expectation(&state, sigma, shots, flip, &mut rng)
            } else {
                // fresh noise trajectory per shot
                let mut sum = 0.0;
                for _ in 0..shots {
                    let state = transform.apply_adjoint_noisy(prep, error_prob, &mut rng)?;
                    sum += sample_pauli_expectation(&state, sigma, 1, flip, &mut rng)?;
                }
                Ok(sum / shots as f64)
            }
        }
    }
}

/// The matrix element `<phi_i| U sigma U^dagger |phi_j>`.
///
/// The exact backend computes it as an inner product. The decomposition
/// backend measures it: directly for `i = j`, and for `i != j` as
/// `(E_+ - E_-)/2` with `E_+-` the expectations in the normalized
/// `(|phi_i> +/- G|phi_i>)/sqrt(2)` states, which requires a recorded G.
pub fn transition_amplitude(
    basis: &SubspaceBasis,
    i: usize,
    j: usize,
    observable: &PauliString,
    transform: &Transformation<'_>,
    config: &CostConfig,
) -> Result<Complex64> {
    if i >= basis.dim() || j >= basis.dim() {
        return Err(SwtError::Invalid(format!(
            "pair ({i}, {j}) out of range for basis dimension {}",
            basis.dim()
        )));
    }
    match config.backend {
        AmplitudeBackend::Exact => {
            let bra = transform.apply_adjoint(basis.state(i))?;
            let ket = transform.apply_adjoint(basis.state(j))?;
            let sigma_ket = ket.apply_pauli(observable)?;
            bra.inner_product(&sigma_ket)
        }
        AmplitudeBackend::GDecomposition => {
            if i == j {
                let prep = basis.state(i);
                let value = transformed_expectation(
                    prep,
                    transform,
                    observable,
                    config,
                    stream_id(i, j, 0, observable),
                )?;
                return Ok(Complex64::new(value, 0.0));
            }
            let g = *basis
                .g_relation(i, j)
                .ok_or(SwtError::MissingGRelation { i, j })?;
            let plus = prepare_state(&StatePrep::GSuperposition {
                basis,
                i,
                g: &g,
                sign: Sign::Plus,
            })?;
            let minus = prepare_state(&StatePrep::GSuperposition {
                basis,
                i,
                g: &g,
                sign: Sign::Minus,
            })?;
            let e_plus = transformed_expectation(
                &plus.state,
                transform,
                observable,
                config,
                stream_id(i, j, 0, observable),
            )?;
            let e_minus = transformed_expectation(
                &minus.state,
                transform,
                observable,
                config,
                stream_id(i, j, 1, observable),
            )?;
            Ok(Complex64::new((e_plus - e_minus) / 2.0, 0.0))
        }
    }
}

/// Apply a Pauli sum to raw amplitudes.
fn apply_sum(sum: &PauliSum, amps: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); amps.len()];
    for (coeff, string) in sum.terms() {
        let c = Complex64::new(*coeff, 0.0);
        for (col, amp) in amps.iter().enumerate() {
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let (row, value) = string.column_action(col);
            out[row] += c * value * amp;
        }
    }
    out
}

fn sampled_pairs(m: usize, count: usize, config: &CostConfig) -> Result<Vec<(usize, usize)>> {
    if count == 0 || count > m * m {
        return Err(SwtError::Invalid(format!(
            "pair sample size {count} outside 1..={}",
            m * m
        )));
    }
    let mut rng = config.shot_plan.rng_stream(MC_PAIR_STREAM);
    Ok((0..count)
        .map(|_| {
            let flat = rng.gen_range(0..m * m);
            (flat / m, flat % m)
        })
        .collect())
}

/// Signed decoupling coefficient
/// `C = (1/M) [ sum_i <phi_i|U H^2 U^dag|phi_i> - sum_ij |<phi_i|U H U^dag|phi_j>|^2 ]`.
///
/// Non-negative up to estimation noise; zero exactly when the transformed
/// Hamiltonian has no matrix elements between the subspace and its
/// complement.
pub fn decoupling_cost_signed(
    ctx: &CostContext<'_>,
    transform: &Transformation<'_>,
    config: &CostConfig,
) -> Result<f64> {
    let m = ctx.basis.dim();
    match config.backend {
        AmplitudeBackend::Exact => {
            let transformed: Vec<StateVector> = ctx
                .basis
                .states()
                .iter()
                .map(|phi| transform.apply_adjoint(phi))
                .collect::<Result<_>>()?;
            let h_applied: Vec<Vec<Complex64>> = transformed
                .iter()
                .map(|v| apply_sum(ctx.hamiltonian, v.amplitudes()))
                .collect();
            let diagonal: f64 = h_applied
                .iter()
                .map(|w| w.iter().map(|a| a.norm_sqr()).sum::<f64>())
                .sum();
            let element = |i: usize, j: usize| -> f64 {
                let dot: Complex64 = transformed[i]
                    .amplitudes()
                    .iter()
                    .zip(h_applied[j].iter())
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                dot.norm_sqr()
            };
            let cross = match config.monte_carlo_pairs {
                None => {
                    let mut total = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            total += element(i, j);
                        }
                    }
                    total
                }
                Some(count) => {
                    let pairs = sampled_pairs(m, count, config)?;
                    let sum: f64 = pairs.iter().map(|&(i, j)| element(i, j)).sum();
                    sum * (m * m) as f64 / count as f64
                }
            };
            Ok((diagonal - cross) / m as f64)
        }
        AmplitudeBackend::GDecomposition => {
            let mut diagonal = 0.0;
            for i in 0..m {
                for (coeff, sigma) in ctx.h_squared.terms() {
                    diagonal += coeff
                        * transition_amplitude(ctx.basis, i, i, sigma, transform, config)?.re;
                }
            }
            let element = |i: usize, j: usize| -> Result<f64> {
                let mut amp = Complex64::new(0.0, 0.0);
                for (coeff, sigma) in ctx.hamiltonian.terms() {
                    amp += Complex64::new(*coeff, 0.0)
                        * transition_amplitude(ctx.basis, i, j, sigma, transform, config)?;
                }
                Ok(amp.norm_sqr())
            };
            let cross = match config.monte_carlo_pairs {
                None => {
                    let mut total = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            total += element(i, j)?;
                        }
                    }
                    total
                }
                Some(count) => {
                    let pairs = sampled_pairs(m, count, config)?;
                    let mut sum = 0.0;
                    for &(i, j) in &pairs {
                        sum += element(i, j)?;
                    }
                    sum * (m * m) as f64 / count as f64
                }
            };
            Ok((diagonal - cross) / m as f64)
        }
    }
}

/// The optimized cost: absolute value of the signed coefficient, so sampling
/// noise cannot push it below the global minimum at zero.
pub fn decoupling_cost(
    ctx: &CostContext<'_>,
    transform: &Transformation<'_>,
    config: &CostConfig,
) -> Result<f64> {
    Ok(decoupling_cost_signed(ctx, transform, config)?.abs())
}

/// Time-evolution overlap cost
/// `L_t = -(1/M) sum_ij |<phi_i| U e^{-iHt} U^dag |phi_j>|^2`,
/// evaluated with a dense propagator. Equals -1 at `t = 0` for any
/// transformation, and stays at -1 for all `t` exactly when the transformed
/// Hamiltonian is block-diagonal.
pub fn evolution_cost(
    ctx: &CostContext<'_>,
    transform: &Transformation<'_>,
    t: f64,
    policy: &NumericPolicy,
) -> Result<f64> {
    let m = ctx.basis.dim();
    let h_dense = ctx.hamiltonian.to_dense(policy)?;
    let propagator = hermitian_evolution(&h_dense, t, policy)?;
    let transformed: Vec<StateVector> = ctx
        .basis
        .states()
        .iter()
        .map(|phi| transform.apply_adjoint(phi))
        .collect::<Result<_>>()?;
    let evolved: Vec<Vec<Complex64>> = transformed
        .iter()
        .map(|v| propagator.apply_vec(v.amplitudes()))
        .collect();
    let mut total = 0.0;
    for bra in &transformed {
        for ket in &evolved {
            let dot: Complex64 = bra
                .amplitudes()
                .iter()
                .zip(ket.iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            total += dot.norm_sqr();
        }
    }
    Ok(-total / m as f64)
}

/// Build the effective block operator from measured transition amplitudes:
/// entry `(i, j)` is `sum_l n_l <phi_i| U sigma_l U^dag |phi_j>` over the
/// Hamiltonian's Pauli terms. When a reference is given, per-eigenstate
/// fidelities are attached (degeneracy-aware).
pub fn reconstruct_heff(
    ctx: &CostContext<'_>,
    transform: &Transformation<'_>,
    config: &CostConfig,
    reference: Option<&EffectiveHamiltonian>,
) -> Result<EffectiveHamiltonian> {
    let m = ctx.basis.dim();
    let mut matrix = Array2::<Complex64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            let mut entry = Complex64::new(0.0, 0.0);
            for (coeff, sigma) in ctx.hamiltonian.terms() {
                entry += Complex64::new(*coeff, 0.0)
                    * transition_amplitude(ctx.basis, i, j, sigma, transform, config)?;
            }
            matrix[(i, j)] = entry;
        }
    }
    let mut heff =
        EffectiveHamiltonian::from_matrix(matrix, ctx.basis.labels().to_vec())?;
    if let Some(reference) = reference {
        heff.fidelities_against(reference, SPECTRUM_CLUSTER_TOL)?;
    }
    Ok(heff)
}
