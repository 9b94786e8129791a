//! `swt`: reproducible effective-Hamiltonian experiments on benchmark spin
//! chains. Three pipelines share one configuration surface: an exact dense
//! reference, a hybrid variational run, and a phase-estimation study, plus a
//! self-check battery.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_ancilla_list, parse_config_file, BackendChoice, RunConfig};

#[derive(Parser)]
#[command(name = "swt", version, about = "Effective-Hamiltonian toolkit runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact dense reference run; writes report.json.
    Exact(Overrides),
    /// Hybrid variational run; writes trace.csv and summary.json.
    Vqa(Overrides),
    /// Phase-estimation fidelity study; writes qpe_report.json.
    Qpe(Overrides),
    /// Run the invariant self-check battery.
    Check(Overrides),
}

/// Flag overrides applied on top of the defaults and the optional config
/// file. Every knob has a default, so all flags are optional.
#[derive(Args)]
struct Overrides {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of spins in the chain (>= 4).
    #[arg(long)]
    n: Option<usize>,
    /// Perturbation strength.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Energy-window offset (eigenvalue rank of the lowest window state).
    #[arg(long)]
    k: Option<usize>,
    /// Energy-window size.
    #[arg(long)]
    m: Option<usize>,
    /// Amplitude backend for the hybrid run.
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Shots per expectation estimate (sampled backend).
    #[arg(long)]
    shots: Option<u64>,
    /// Seed for every random stream of the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Readout bit-flip probability per measured qubit.
    #[arg(long = "readout-flip")]
    readout_flip: Option<f64>,
    /// Stochastic two-qubit error probability per entangling step.
    #[arg(long = "pauli-error")]
    pauli_error: Option<f64>,
    /// Comma-separated ancilla counts for the phase-estimation sweep.
    #[arg(long)]
    ancillas: Option<String>,
    /// Realize the inner reflection through the ancilla pipeline too.
    #[arg(long)]
    nested: bool,
    /// Optimizer iteration cap.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Optimizer patience (iterations without improvement before stopping).
    #[arg(long)]
    patience: Option<usize>,
    /// Per-component size of the optimizer's first update.
    #[arg(long = "first-step")]
    first_step: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_config(overrides: &Overrides) -> Result<RunConfig, commands::CommandError> {
    let mut config = RunConfig::default();
    if let Some(path) = &overrides.config {
        let pairs = parse_config_file(path).map_err(commands::usage_error)?;
        config.apply_file(&pairs).map_err(commands::usage_error)?;
    }
    if let Some(n) = overrides.n {
        config.n_spins = n;
    }
    if let Some(epsilon) = overrides.epsilon {
        config.epsilon = epsilon;
    }
    if let Some(k) = overrides.k {
        config.window_k = k;
    }
    if let Some(m) = overrides.m {
        config.window_m = m;
    }
    if let Some(backend) = overrides.backend {
        config.backend = backend;
    }
    if let Some(shots) = overrides.shots {
        config.shots = shots;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(p) = overrides.readout_flip {
        config.readout_flip = p;
    }
    if let Some(p) = overrides.pauli_error {
        config.pauli_error = p;
    }
    if let Some(list) = &overrides.ancillas {
        config.ancillas = parse_ancilla_list(list).map_err(commands::usage_error)?;
    }
    if overrides.nested {
        config.nested = true;
    }
    if let Some(max_iter) = overrides.max_iter {
        config.max_iter = max_iter;
    }
    if let Some(patience) = overrides.patience {
        config.patience = patience;
    }
    if let Some(first_step) = overrides.first_step {
        config.first_step = first_step;
    }
    if let Some(out) = &overrides.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Exact(overrides) => {
            resolve_config(overrides).and_then(|config| commands::run_exact(&config))
        }
        Command::Vqa(overrides) => {
            resolve_config(overrides).and_then(|config| commands::run_vqa(&config))
        }
        Command::Qpe(overrides) => {
            resolve_config(overrides).and_then(|config| commands::run_qpe(&config))
        }
        Command::Check(overrides) => {
            resolve_config(overrides).and_then(|config| commands::run_check(&config))
        }
    };
    if let Err(error) = result {
        eprintln!("error: {}", error.message);
        std::process::exit(error.code);
    }
}
