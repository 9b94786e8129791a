//! The four subcommands: exact reference run, hybrid optimization run,
//! phase-estimation study, and the self-check battery.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;

use swt_core::ansatz::{ansatz_from_commutator, preset_n4_ansatz, ParameterizedCircuit};
use swt_core::dense::{
    block_coupling, direct_rotation, effective_hamiltonian, eigh, gap_report,
    projector_from_columns, projector_from_states, reflection_from_projector, DenseOperator,
    GapReport,
};
use swt_core::effective::HeffExport;
use swt_core::model::{ground_basis, window_subspace, ModelSpec, SubspaceBasis};
use swt_core::pauli::{PauliString, PauliSum};
use swt_core::qpe::{
    complete_pauli_basis, compress_coefficients, effective_pauli_coefficients, qpe_direct_rotation,
    qpe_reflection, reflection_product, schedule_evolution, InnerReflection, QpeConfig,
};
use swt_core::spsa::{spsa_minimize, OptimizationTrace, SpsaOptions};
use swt_core::state::{estimate_expectation, ShotPlan, StateVector};
use swt_core::vqa::{
    decoupling_cost, evolution_cost, reconstruct_heff, transition_amplitude, AmplitudeBackend,
    CostConfig, CostContext, Transformation,
};
use swt_core::{NumericPolicy, SwtError};

use crate::config::{BackendChoice, RunConfig};

const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-level failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CommandError {
    pub code: i32,
    pub message: String,
}

impl CommandError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn io(message: impl std::fmt::Display) -> Self {
        Self { code: 1, message: format!("i/o error: {message}") }
    }
}

pub fn exit_code_for(error: &SwtError) -> i32 {
    match error {
        SwtError::ModelTooSmall(_)
        | SwtError::Invalid(_)
        | SwtError::Parse(_)
        | SwtError::InvalidPrep(_)
        | SwtError::WindowOutOfRange { .. }
        | SwtError::ParameterLength { .. }
        | SwtError::MissingGRelation { .. }
        | SwtError::ThresholdOutsideSpectrum { .. } => 2,
        SwtError::ResourceCap { .. } => 4,
        _ => 3,
    }
}

impl From<SwtError> for CommandError {
    fn from(error: SwtError) -> Self {
        Self { code: exit_code_for(&error), message: error.to_string() }
    }
}

type CommandResult = Result<(), CommandError>;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CommandResult {
    let text = serde_json::to_string_pretty(value)
        .map_err(CommandError::io)?;
    fs::write(path, text + "\n").map_err(CommandError::io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn ensure_out_dir(config: &RunConfig) -> CommandResult {
    fs::create_dir_all(&config.out).map_err(CommandError::io)
}

/// Build the subspace basis: the recorded four-state ground basis for the
/// default window, a plain eigenvector window otherwise.
fn build_basis(
    config: &RunConfig,
    h0_dense: &DenseOperator,
) -> Result<SubspaceBasis, SwtError> {
    if config.window_k == 0 && config.window_m == 4 {
        ground_basis(config.n_spins, &config.policy)
    } else {
        let (basis, _) = window_subspace(h0_dense, config.window_k, config.window_m, &config.policy)?;
        Ok(basis)
    }
}

fn low_window_projector(
    h: &DenseOperator,
    k: usize,
    m: usize,
    policy: &NumericPolicy,
) -> Result<(DenseOperator, Vec<f64>), SwtError> {
    let decomp = eigh(h, policy)?;
    let columns: Vec<Vec<C64>> = (k..k + m).map(|r| decomp.eigenvector(r)).collect();
    let p = projector_from_columns(h.n_qubits(), &columns, policy)?;
    Ok((p, decomp.eigenvalues()[k..k + m].to_vec()))
}

#[derive(Serialize)]
struct OracleComparison {
    target_eigenvalues: Vec<f64>,
    eigenvalue_deviation: f64,
    mapping_residual: f64,
}

#[derive(Serialize)]
struct ExactReport<'a> {
    toolkit_version: &'static str,
    config: &'a RunConfig,
    gap: GapReport,
    effective: HeffExport,
    oracle: OracleComparison,
}

pub fn run_exact(config: &RunConfig) -> CommandResult {
    ensure_out_dir(config)?;
    let spec = ModelSpec::new(config.n_spins, config.epsilon)?;
    let h0_dense = spec.h0().to_dense(&config.policy)?;
    let basis = build_basis(config, &h0_dense)?;
    let h_dense = spec.hamiltonian().to_dense(&config.policy)?;

    let gap = gap_report(
        &spec.h0(),
        &spec.v(),
        config.epsilon,
        config.window_k,
        config.window_m,
        &config.policy,
    )?;
    if !gap.condition_met {
        eprintln!(
            "note: perturbation norm {:.3} is not below half the gap ({:.3}); proceeding anyway",
            gap.v_norm,
            gap.gap / 2.0
        );
    }

    let p0 = projector_from_states(basis.states(), &config.policy)?;
    let (p_low, targets) =
        low_window_projector(&h_dense, config.window_k, config.window_m, &config.policy)?;
    let u = direct_rotation(&p0, &p_low, &config.policy)?;
    let heff = effective_hamiltonian(&h_dense, &u, &basis, &config.policy)?;

    let eigenvalue_deviation = heff
        .eigenvalues()
        .iter()
        .zip(targets.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let mapping_residual = u.dot(&p_low).dot(&u.adjoint()).max_abs_diff(&p0);

    println!("eigenvalues: {:?}", heff.eigenvalues());
    println!("oracle deviation: {eigenvalue_deviation:.3e}, mapping residual: {mapping_residual:.3e}");

    let report = ExactReport {
        toolkit_version: TOOLKIT_VERSION,
        config,
        gap,
        effective: heff.export(),
        oracle: OracleComparison {
            target_eigenvalues: targets,
            eigenvalue_deviation,
            mapping_residual,
        },
    };
    write_json(&config.out.join("report.json"), &report)
}

fn shot_plan_for(config: &RunConfig, seed: u64) -> Result<ShotPlan, SwtError> {
    ShotPlan::sampled(config.shots, seed)?
        .with_readout_flip(config.readout_flip)?
        .with_pauli_error(config.pauli_error)
}

fn cost_config_for(config: &RunConfig, seed: u64) -> Result<CostConfig, SwtError> {
    Ok(match config.backend {
        BackendChoice::Exact => CostConfig::exact(),
        BackendChoice::GShots => CostConfig {
            backend: AmplitudeBackend::GDecomposition,
            shot_plan: shot_plan_for(config, seed)?,
            monte_carlo_pairs: None,
        },
    })
}

fn build_circuit(spec: &ModelSpec) -> Result<ParameterizedCircuit, SwtError> {
    if spec.n_spins == 4 {
        Ok(preset_n4_ansatz())
    } else {
        ansatz_from_commutator(&spec.h0(), &spec.v())
    }
}

fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

fn write_trace_csv(
    path: &Path,
    trace: &OptimizationTrace,
    n_parameters: usize,
    m: usize,
) -> CommandResult {
    let mut file = fs::File::create(path).map_err(CommandError::io)?;
    let mut header = vec!["step".to_string(), "cost".to_string()];
    header.extend((0..n_parameters).map(|k| format!("theta_{k}")));
    header.extend((0..m).map(|k| format!("eig_{k}")));
    writeln!(file, "{}", header.join(",")).map_err(CommandError::io)?;
    for entry in &trace.iterations {
        let mut row = vec![entry.step.to_string(), format_f64(entry.cost)];
        row.extend(entry.theta.iter().map(|t| format_f64(*t)));
        match &entry.spectrum {
            Some(spectrum) => row.extend(spectrum.iter().map(|e| format_f64(*e))),
            None => row.extend(std::iter::repeat_with(String::new).take(m)),
        }
        writeln!(file, "{}", row.join(",")).map_err(CommandError::io)?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct VqaSummary<'a> {
    toolkit_version: &'static str,
    config: &'a RunConfig,
    converged: bool,
    iterations: usize,
    best_cost: f64,
    best_theta: Vec<f64>,
    final_cost: f64,
    final_theta: Vec<f64>,
    eigenvalues: Vec<f64>,
    reference_eigenvalues: Vec<f64>,
    fidelities: Option<Vec<f64>>,
    hermitize_residual: f64,
    gap: GapReport,
}

const SNAPSHOT_SALT: u64 = 0x5350_4543_5452_414C;
const FINAL_SALT: u64 = 0x4649_4E41_4C52_554E;

pub fn run_vqa(config: &RunConfig) -> CommandResult {
    ensure_out_dir(config)?;
    let spec = ModelSpec::new(config.n_spins, config.epsilon)?;
    let h = spec.hamiltonian();
    let h0_dense = spec.h0().to_dense(&config.policy)?;
    let basis = build_basis(config, &h0_dense)?;
    let h_dense = h.to_dense(&config.policy)?;
    let circuit = build_circuit(&spec)?;
    let ctx = CostContext::new(&basis, &h)?;
    let gap = gap_report(
        &spec.h0(),
        &spec.v(),
        config.epsilon,
        config.window_k,
        config.window_m,
        &config.policy,
    )?;

    if config.backend == BackendChoice::GShots {
        let m = basis.dim();
        let complete = (0..m)
            .all(|i| (0..m).all(|j| i == j || basis.g_relation(i, j).is_some()));
        if !complete {
            return Err(CommandError::usage(
                "the sampled backend needs the recorded symmetry relations of the \
                 ground basis; this window has none (use --backend exact)",
            ));
        }
    }

    let reference = {
        let p0 = projector_from_states(basis.states(), &config.policy)?;
        let (p_low, _) = low_window_projector(
            &h_dense,
            config.window_k,
            config.window_m,
            &config.policy,
        )?;
        let u = direct_rotation(&p0, &p_low, &config.policy)?;
        effective_hamiltonian(&h_dense, &u, &basis, &config.policy)?
    };

    // fresh sub-seed per cost evaluation so repeated measurements never share
    // sampled shots
    let eval_counter = std::cell::Cell::new(0u64);
    let cost = |theta: &[f64]| -> f64 {
        let eval = eval_counter.get();
        eval_counter.set(eval + 1);
        let seed = splitmix64(config.seed ^ eval);
        let cost_config = match cost_config_for(config, seed) {
            Ok(c) => c,
            Err(_) => return f64::NAN,
        };
        let transform = Transformation::Circuit { circuit: &circuit, theta };
        decoupling_cost(&ctx, &transform, &cost_config).unwrap_or(f64::NAN)
    };

    let options = SpsaOptions {
        max_iter: config.max_iter,
        patience: config.patience,
        seed: config.seed,
        target_first_step: config.first_step,
        ..SpsaOptions::default()
    };
    let theta0 = vec![0.0; circuit.n_parameters()];
    let trace_path = config.out.join("trace.csv");
    let mut trace = match spsa_minimize(cost, &theta0, &options) {
        Ok(trace) => trace,
        Err(abort) => {
            // flush what was recorded before the abort
            write_trace_csv(&trace_path, &abort.trace, circuit.n_parameters(), basis.dim())?;
            return Err(CommandError {
                code: 3,
                message: format!("optimizer aborted: {abort} (partial trace flushed)"),
            });
        }
    };

    // attach a spectrum snapshot to every accepted iterate
    for entry in &mut trace.iterations {
        let seed = splitmix64(config.seed ^ SNAPSHOT_SALT ^ entry.step as u64);
        let cost_config = cost_config_for(config, seed)?;
        let transform = Transformation::Circuit { circuit: &circuit, theta: &entry.theta };
        let heff = reconstruct_heff(&ctx, &transform, &cost_config, None)?;
        entry.spectrum = Some(heff.eigenvalues().to_vec());
    }

    let final_config = cost_config_for(config, splitmix64(config.seed ^ FINAL_SALT))?;
    let transform = Transformation::Circuit { circuit: &circuit, theta: &trace.best_theta };
    let heff = reconstruct_heff(&ctx, &transform, &final_config, Some(&reference))?;

    println!(
        "converged: {} after {} iterations, best cost {:.6e}",
        trace.converged,
        trace.iterations.len() - 1,
        trace.best_cost
    );
    println!("eigenvalues: {:?}", heff.eigenvalues());
    if let Some(fidelities) = heff.fidelities() {
        println!("fidelities: {fidelities:?}");
    }

    write_trace_csv(&trace_path, &trace, circuit.n_parameters(), basis.dim())?;
    let summary = VqaSummary {
        toolkit_version: TOOLKIT_VERSION,
        config,
        converged: trace.converged,
        iterations: trace.iterations.len() - 1,
        best_cost: trace.best_cost,
        best_theta: trace.best_theta.clone(),
        final_cost: trace.iterations.last().map(|e| e.cost).unwrap_or(f64::NAN),
        final_theta: trace.final_theta.clone(),
        eigenvalues: heff.eigenvalues().to_vec(),
        reference_eigenvalues: reference.eigenvalues().to_vec(),
        fidelities: heff.fidelities().map(|f| f.to_vec()),
        hermitize_residual: heff.hermitize_residual(),
        gap,
    };
    write_json(&config.out.join("summary.json"), &summary)
}

#[derive(Serialize)]
struct QpeRow {
    ancillas: usize,
    time_scale: f64,
    energy_shift: f64,
    k_threshold: u64,
    state_fidelities: Vec<f64>,
    ancilla_leakages: Vec<f64>,
    warning_count: usize,
    reflection_flip_fidelity: f64,
}

#[derive(Serialize)]
struct QpeReport<'a> {
    toolkit_version: &'static str,
    config: &'a RunConfig,
    threshold_energy: f64,
    basis_labels: Vec<String>,
    rows: Vec<QpeRow>,
    monotone_improvement: bool,
}

pub fn run_qpe(config: &RunConfig) -> CommandResult {
    ensure_out_dir(config)?;
    let spec = ModelSpec::new(config.n_spins, config.epsilon)?;
    let h0_dense = spec.h0().to_dense(&config.policy)?;
    let basis = build_basis(config, &h0_dense)?;
    let h_dense = spec.hamiltonian().to_dense(&config.policy)?;

    // threshold halfway into the unperturbed gap above the window
    let h0_spectrum = eigh(&h0_dense, &config.policy)?;
    let m = basis.dim();
    if config.window_k + m >= h0_dense.dim() {
        return Err(CommandError::usage(
            "window reaches the top of the spectrum; no reflection threshold exists",
        ));
    }
    let top_of_window = h0_spectrum.eigenvalues()[config.window_k + m - 1];
    let bottom_above = h0_spectrum.eigenvalues()[config.window_k + m];
    let threshold_energy = bottom_above - (bottom_above - top_of_window) / 2.0;

    let p0 = projector_from_states(basis.states(), &config.policy)?;
    let (p_low, _) =
        low_window_projector(&h_dense, config.window_k, config.window_m, &config.policy)?;
    let u = direct_rotation(&p0, &p_low, &config.policy)?;
    let exact_walk = reflection_product(
        &h_dense,
        &basis,
        &InnerReflection::ExactDense,
        &config.policy,
    )?;
    let h_spectrum = eigh(&h_dense, &config.policy)?;
    let top_eigenvector = StateVector::from_amplitudes(
        h_dense.n_qubits(),
        h_spectrum.eigenvector(h_dense.dim() - 1),
    )?;

    let mut rows = Vec::new();
    for &l in &config.ancillas {
        let qpe_config = schedule_evolution(&h_dense, l, threshold_energy, &config.policy)?;
        let walk = if config.nested {
            reflection_product(
                &h_dense,
                &basis,
                &InnerReflection::Qpe(qpe_config),
                &config.policy,
            )?
        } else {
            exact_walk.clone()
        };
        let mut state_fidelities = Vec::new();
        let mut ancilla_leakages = Vec::new();
        let mut warning_count = 0;
        for state in basis.states() {
            let outcome = qpe_direct_rotation(state, &walk, l, &config.policy)?;
            let expected = state.apply_unitary(&u)?;
            state_fidelities.push(expected.inner_product(&outcome.state)?.norm_sqr());
            ancilla_leakages.push(outcome.ancilla_leakage);
            warning_count += outcome.warnings.len();
        }
        let reflection_flip_fidelity = {
            let outcome = qpe_reflection(&top_eigenvector, &h_dense, &qpe_config, &config.policy)?;
            warning_count += outcome.warnings.len();
            let overlap = top_eigenvector.inner_product(&outcome.state)?;
            if overlap.re >= 0.0 {
                0.0
            } else {
                (1.0 - outcome.ancilla_leakage) * overlap.norm_sqr()
            }
        };
        println!(
            "l={l}: fidelities {state_fidelities:?}, flip fidelity {reflection_flip_fidelity:.6}"
        );
        rows.push(QpeRow {
            ancillas: l,
            time_scale: qpe_config.time_scale,
            energy_shift: qpe_config.energy_shift,
            k_threshold: qpe_config.k_threshold,
            state_fidelities,
            ancilla_leakages,
            warning_count,
            reflection_flip_fidelity,
        });
    }

    let monotone_improvement = (0..basis.dim()).all(|i| {
        rows.windows(2)
            .all(|pair| pair[1].state_fidelities[i] + 1e-12 >= pair[0].state_fidelities[i])
    });
    println!("monotone improvement: {monotone_improvement}");

    let report = QpeReport {
        toolkit_version: TOOLKIT_VERSION,
        config,
        threshold_energy,
        basis_labels: basis.labels().to_vec(),
        rows,
        monotone_improvement,
    };
    write_json(&config.out.join("qpe_report.json"), &report)
}

struct Check {
    name: &'static str,
    run: fn(&RunConfig) -> Result<String, String>,
}

fn check_pauli_products(_: &RunConfig) -> Result<String, String> {
    use rand::{Rng, SeedableRng};
    let policy = NumericPolicy::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let letters = ["I", "X", "Y", "Z"];
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let random_string = |rng: &mut rand_chacha::ChaCha8Rng| -> PauliString {
            (0..3)
                .map(|_| letters[rng.gen_range(0..4)])
                .collect::<String>()
                .parse()
                .unwrap()
        };
        let a = random_string(&mut rng);
        let b = random_string(&mut rng);
        let (phase, product) = a.product(&b).map_err(|e| e.to_string())?;
        let lhs = a
            .to_dense(&policy)
            .unwrap()
            .dot(&b.to_dense(&policy).unwrap());
        let rhs = product.to_dense(&policy).unwrap().scaled(phase.as_complex());
        worst = worst.max(lhs.max_abs_diff(&rhs));
    }
    if worst < 1e-12 {
        Ok(format!("20 random products match the dense oracle to {worst:.1e}"))
    } else {
        Err(format!("product/dense mismatch {worst:.3e}"))
    }
}

fn check_commutator(_: &RunConfig) -> Result<String, String> {
    let spec = ModelSpec::new(4, 1.0).map_err(|e| e.to_string())?;
    let k = spec
        .h0()
        .hermitian_commutator(&spec.v())
        .map_err(|e| e.to_string())?;
    if k.len() != 12 {
        return Err(format!("commutator has {} terms, expected 12", k.len()));
    }
    let reversed = spec
        .v()
        .hermitian_commutator(&spec.h0())
        .map_err(|e| e.to_string())?;
    if reversed.scaled(-1.0) != k {
        return Err("commutator is not antisymmetric".into());
    }
    Ok("12 terms, antisymmetric".into())
}

fn check_serialization(_: &RunConfig) -> Result<String, String> {
    let spec = ModelSpec::new(5, 0.25).map_err(|e| e.to_string())?;
    let text = spec.hamiltonian().to_string();
    let reparsed: PauliSum = text.parse().map_err(|e: SwtError| e.to_string())?;
    if reparsed.to_string() == text {
        Ok("text round trip is byte-stable".into())
    } else {
        Err("re-emitted text differs".into())
    }
}

fn check_direct_rotation(config: &RunConfig) -> Result<String, String> {
    let policy = &config.policy;
    let spec = ModelSpec::new(4, 1.0).map_err(|e| e.to_string())?;
    let h_dense = spec.hamiltonian().to_dense(policy).map_err(|e| e.to_string())?;
    let basis = ground_basis(4, policy).map_err(|e| e.to_string())?;
    let p0 = projector_from_states(basis.states(), policy).map_err(|e| e.to_string())?;
    let r0 = reflection_from_projector(&p0);
    let r0_sq = r0.dot(&r0).max_abs_diff(&DenseOperator::identity(4));
    if r0_sq > 1e-10 {
        return Err(format!("reflection square deviates by {r0_sq:.3e}"));
    }
    let (p_low, targets) = low_window_projector(&h_dense, 0, 4, policy).map_err(|e| e.to_string())?;
    let u = direct_rotation(&p0, &p_low, policy).map_err(|e| e.to_string())?;
    let mapping = u.dot(&p_low).dot(&u.adjoint()).max_abs_diff(&p0);
    if mapping > 1e-8 {
        return Err(format!("subspace mapping residual {mapping:.3e}"));
    }
    let heff = effective_hamiltonian(&h_dense, &u, &basis, policy).map_err(|e| e.to_string())?;
    let dev = heff
        .eigenvalues()
        .iter()
        .zip(targets.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if dev > 1e-8 {
        return Err(format!("effective spectrum off by {dev:.3e}"));
    }
    Ok(format!("mapping {mapping:.1e}, spectrum {dev:.1e}"))
}

fn check_cost_identities(config: &RunConfig) -> Result<String, String> {
    use rand::{Rng, SeedableRng};
    let policy = &config.policy;
    let spec = ModelSpec::new(4, 1.0).map_err(|e| e.to_string())?;
    let h = spec.hamiltonian();
    let h_dense = h.to_dense(policy).map_err(|e| e.to_string())?;
    let basis = ground_basis(4, policy).map_err(|e| e.to_string())?;
    let ctx = CostContext::new(&basis, &h).map_err(|e| e.to_string())?;
    let circuit = preset_n4_ansatz();
    let p0 = projector_from_states(basis.states(), policy).map_err(|e| e.to_string())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let mut worst_trace = 0.0f64;
    let mut worst_l0 = 0.0f64;
    for _ in 0..5 {
        let theta: Vec<f64> = (0..3).map(|_| 2.0 * (rng.gen::<f64>() - 0.5)).collect();
        let transform = Transformation::Circuit { circuit: &circuit, theta: &theta };
        let cost = decoupling_cost(&ctx, &transform, &CostConfig::exact())
            .map_err(|e| e.to_string())?;
        let u = circuit.dense_unitary(&theta, policy).map_err(|e| e.to_string())?;
        let p_rotated = u.adjoint().dot(&p0).dot(&u);
        worst_trace = worst_trace.max((cost - block_coupling(&h_dense, &p_rotated, 4)).abs());
        let l0 = evolution_cost(&ctx, &transform, 0.0, policy).map_err(|e| e.to_string())?;
        worst_l0 = worst_l0.max((l0 + 1.0).abs());
    }
    if worst_trace > 1e-10 {
        return Err(format!("cost vs dense trace deviates by {worst_trace:.3e}"));
    }
    if worst_l0 > 1e-12 {
        return Err(format!("zero-time evolution cost off by {worst_l0:.3e}"));
    }
    Ok(format!("trace identity {worst_trace:.1e}, L(0) = -1 to {worst_l0:.1e}"))
}

fn check_backend_equivalence(config: &RunConfig) -> Result<String, String> {
    use rand::{Rng, SeedableRng};
    let policy = &config.policy;
    let spec = ModelSpec::new(4, 1.0).map_err(|e| e.to_string())?;
    let h = spec.hamiltonian();
    let basis = ground_basis(4, policy).map_err(|e| e.to_string())?;
    let circuit = preset_n4_ansatz();
    let exact = CostConfig::exact();
    let decomposed = CostConfig {
        backend: AmplitudeBackend::GDecomposition,
        ..CostConfig::exact()
    };
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let theta: Vec<f64> = (0..3).map(|_| 2.0 * (rng.gen::<f64>() - 0.5)).collect();
        let transform = Transformation::Circuit { circuit: &circuit, theta: &theta };
        for i in 0..4 {
            for j in 0..4 {
                for (_, sigma) in h.terms() {
                    let a = transition_amplitude(&basis, i, j, sigma, &transform, &exact)
                        .map_err(|e| e.to_string())?;
                    let b = transition_amplitude(&basis, i, j, sigma, &transform, &decomposed)
                        .map_err(|e| e.to_string())?;
                    worst = worst.max((a - b).norm());
                }
            }
        }
    }
    if worst < 1e-12 {
        Ok(format!("backends agree to {worst:.1e}"))
    } else {
        Err(format!("backend disagreement {worst:.3e}"))
    }
}

fn check_qpe_pipelines(config: &RunConfig) -> Result<String, String> {
    let policy = &config.policy;
    // grid-aligned diagonal: the reflection is exact
    let mut h = DenseOperator::zeros(2);
    for (k, e) in [0.0, 1.0, 2.0, 3.0].iter().enumerate() {
        h.set(k, k, C64::new(*e, 0.0));
    }
    let qpe_config = QpeConfig {
        ancillas: 3,
        time_scale: 2.0 * std::f64::consts::PI / 8.0,
        energy_shift: 0.0,
        k_threshold: 2,
    };
    let state = StateVector::from_amplitudes(2, vec![C64::new(0.5, 0.0); 4]).unwrap();
    let outcome = qpe_reflection(&state, &h, &qpe_config, policy).map_err(|e| e.to_string())?;
    if outcome.ancilla_leakage > 1e-10 {
        return Err(format!("grid-aligned leakage {:.3e}", outcome.ancilla_leakage));
    }
    // rotation fidelity on the benchmark
    let spec = ModelSpec::new(4, 1.0).map_err(|e| e.to_string())?;
    let h_dense = spec.hamiltonian().to_dense(policy).map_err(|e| e.to_string())?;
    let basis = ground_basis(4, policy).map_err(|e| e.to_string())?;
    let walk = reflection_product(&h_dense, &basis, &InnerReflection::ExactDense, policy)
        .map_err(|e| e.to_string())?;
    let p0 = projector_from_states(basis.states(), policy).map_err(|e| e.to_string())?;
    let (p_low, _) = low_window_projector(&h_dense, 0, 4, policy).map_err(|e| e.to_string())?;
    let u = direct_rotation(&p0, &p_low, policy).map_err(|e| e.to_string())?;
    let state = basis.state(0);
    let outcome = qpe_direct_rotation(state, &walk, 8, policy).map_err(|e| e.to_string())?;
    let fidelity = state
        .apply_unitary(&u)
        .map_err(|e| e.to_string())?
        .inner_product(&outcome.state)
        .map_err(|e| e.to_string())?
        .norm_sqr();
    if fidelity < 0.99 {
        return Err(format!("rotation fidelity {fidelity:.6} < 0.99"));
    }
    Ok(format!("grid case exact, rotation fidelity {fidelity:.4} at l=8"))
}

fn check_shot_estimator(_: &RunConfig) -> Result<String, String> {
    let sq = std::f64::consts::FRAC_1_SQRT_2;
    let plus = StateVector::from_amplitudes(1, vec![C64::new(sq, 0.0), C64::new(sq, 0.0)])
        .map_err(|e| e.to_string())?;
    let sigma: PauliString = "Z".parse().unwrap();
    let plan = ShotPlan::sampled(10_000, 42).map_err(|e| e.to_string())?;
    let first = estimate_expectation(&plus, &sigma, &plan).map_err(|e| e.to_string())?;
    let second = estimate_expectation(&plus, &sigma, &plan).map_err(|e| e.to_string())?;
    if first != second {
        return Err("same seed produced different estimates".into());
    }
    if first.abs() > 0.04 {
        return Err(format!("estimate {first:.4} further than 4 standard errors from 0"));
    }
    Ok(format!("seeded estimate {first:.4}, reproducible"))
}

fn check_pauli_reconstruction(config: &RunConfig) -> Result<String, String> {
    let policy = &config.policy;
    let spec = ModelSpec::new(4, 1.0).map_err(|e| e.to_string())?;
    let h = spec.hamiltonian();
    let h_dense = h.to_dense(policy).map_err(|e| e.to_string())?;
    let basis = ground_basis(4, policy).map_err(|e| e.to_string())?;
    let p0 = projector_from_states(basis.states(), policy).map_err(|e| e.to_string())?;
    let (p_low, _) = low_window_projector(&h_dense, 0, 4, policy).map_err(|e| e.to_string())?;
    let u = direct_rotation(&p0, &p_low, policy).map_err(|e| e.to_string())?;
    let all = complete_pauli_basis(4);
    let coefficients = effective_pauli_coefficients(&h, &u, &basis, &all, policy)
        .map_err(|e| e.to_string())?;
    let compressed = compress_coefficients(&coefficients, &basis).map_err(|e| e.to_string())?;
    let exact = effective_hamiltonian(&h_dense, &u, &basis, policy).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            worst = worst.max((compressed[(i, j)] - exact.matrix()[(i, j)]).norm());
        }
    }
    if worst > 1e-9 {
        return Err(format!("complete-basis reconstruction off by {worst:.3e}"));
    }
    Ok(format!("complete-basis reconstruction matches to {worst:.1e}"))
}

pub fn run_check(config: &RunConfig) -> CommandResult {
    let checks: &[Check] = &[
        Check { name: "pauli products", run: check_pauli_products },
        Check { name: "commutator", run: check_commutator },
        Check { name: "serialization", run: check_serialization },
        Check { name: "direct rotation", run: check_direct_rotation },
        Check { name: "cost identities", run: check_cost_identities },
        Check { name: "backend equivalence", run: check_backend_equivalence },
        Check { name: "phase estimation", run: check_qpe_pipelines },
        Check { name: "shot estimator", run: check_shot_estimator },
        Check { name: "pauli reconstruction", run: check_pauli_reconstruction },
    ];
    let mut failures = 0;
    for check in checks {
        match (check.run)(config) {
            Ok(detail) => println!("ok      {} - {detail}", check.name),
            Err(detail) => {
                failures += 1;
                println!("FAILED  {} - {detail}", check.name);
            }
        }
    }
    if failures > 0 {
        return Err(CommandError {
            code: 3,
            message: format!("{failures} of {} checks failed", checks.len()),
        });
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}

pub fn usage_error(message: impl Into<String>) -> CommandError {
    CommandError::usage(message)
}
