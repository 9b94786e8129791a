//! Run configuration: defaults, flat key-value config files, and CLI-flag
//! overrides. The effective configuration is echoed into every output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use swt_core::NumericPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendChoice {
    /// Exact inner-product amplitudes.
    Exact,
    /// Symmetry-decomposed expectation measurements with sampled shots.
    GShots,
}

/// Every knob of a run, fully defaulted; serialized into outputs verbatim.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub n_spins: usize,
    pub epsilon: f64,
    /// Energy-window offset and size; the default (0, 4) selects the ground
    /// quadruplet of the benchmark chain.
    pub window_k: usize,
    pub window_m: usize,
    pub backend: BackendChoice,
    pub shots: u64,
    pub seed: u64,
    pub readout_flip: f64,
    pub pauli_error: f64,
    /// Ancilla counts swept by the phase-estimation study.
    pub ancillas: Vec<usize>,
    /// Realize the inner reflection through the ancilla pipeline as well.
    pub nested: bool,
    pub max_iter: usize,
    pub patience: usize,
    /// Per-component size of the optimizer's first update.
    pub first_step: f64,
    pub out: PathBuf,
    #[serde(skip)]
    pub policy: NumericPolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_spins: 4,
            epsilon: 1.0,
            window_k: 0,
            window_m: 4,
            backend: BackendChoice::Exact,
            shots: 10_000,
            seed: 0,
            readout_flip: 0.0,
            pauli_error: 0.0,
            ancillas: vec![4, 6, 8],
            nested: false,
            max_iter: 300,
            patience: 20,
            first_step: 0.1,
            out: PathBuf::from("."),
            policy: NumericPolicy::default(),
        }
    }
}

pub fn parse_ancilla_list(text: &str) -> Result<Vec<usize>, String> {
    let list: Result<Vec<usize>, _> = text
        .split(',')
        .map(|part| part.trim().parse::<usize>())
        .collect();
    match list {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("expected a comma-separated ancilla list, got '{text}'")),
    }
}

/// Parse a flat `key = value` file (one pair per line, `#` comments).
pub fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or(format!("line {}: expected 'key = value'", lineno + 1))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

impl RunConfig {
    /// Apply config-file pairs on top of the defaults. Unknown keys are
    /// rejected so typos do not silently fall back to defaults.
    pub fn apply_file(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
            value
                .parse::<T>()
                .map_err(|_| format!("bad value '{value}' for key '{key}'"))
        }
        for (key, value) in pairs {
            match key.as_str() {
                "n" | "n_spins" => self.n_spins = parse(key, value)?,
                "epsilon" => self.epsilon = parse(key, value)?,
                "k" | "window_k" => self.window_k = parse(key, value)?,
                "m" | "window_m" => self.window_m = parse(key, value)?,
                "backend" => {
                    self.backend = match value.as_str() {
                        "exact" => BackendChoice::Exact,
                        "g-shots" | "g_shots" => BackendChoice::GShots,
                        other => return Err(format!("unknown backend '{other}'")),
                    }
                }
                "shots" => self.shots = parse(key, value)?,
                "seed" => self.seed = parse(key, value)?,
                "readout_flip" => self.readout_flip = parse(key, value)?,
                "pauli_error" => self.pauli_error = parse(key, value)?,
                "ancillas" => self.ancillas = parse_ancilla_list(value)?,
                "nested" => self.nested = parse(key, value)?,
                "max_iter" => self.max_iter = parse(key, value)?,
                "patience" => self.patience = parse(key, value)?,
                "first_step" => self.first_step = parse(key, value)?,
                "out" => self.out = PathBuf::from(value),
                "tol_hermiticity" => self.policy.hermiticity = parse(key, value)?,
                "tol_unitarity" => self.policy.unitarity = parse(key, value)?,
                "tol_orthonormality" => self.policy.orthonormality = parse(key, value)?,
                "tol_projector" => self.policy.projector = parse(key, value)?,
                "tol_branch_guard" => self.policy.branch_guard = parse(key, value)?,
                "tol_degeneracy_gap" => self.policy.degeneracy_gap = parse(key, value)?,
                "tol_window_boundary" => self.policy.window_boundary = parse(key, value)?,
                "dense_qubit_cap" => self.policy.dense_qubit_cap = parse(key, value)?,
                other => return Err(format!("unknown config key '{other}'")),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_pairs_override_defaults() {
        let mut config = RunConfig::default();
        let mut pairs = BTreeMap::new();
        pairs.insert("n".to_string(), "6".to_string());
        pairs.insert("epsilon".to_string(), "0.5".to_string());
        pairs.insert("ancillas".to_string(), "3, 5".to_string());
        config.apply_file(&pairs).unwrap();
        assert_eq!(config.n_spins, 6);
        assert_eq!(config.epsilon, 0.5);
        assert_eq!(config.ancillas, vec![3, 5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut config = RunConfig::default();
        let mut pairs = BTreeMap::new();
        pairs.insert("epslion".to_string(), "0.5".to_string());
        assert!(config.apply_file(&pairs).is_err());
    }
}
