//! End-to-end tests of the `swt` binary: output files, exit codes, and
//! rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn swt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swt"))
}

fn run(args: &[&str]) -> Output {
    swt().args(args).output().expect("binary runs")
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("swt-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn exact_run_reproduces_low_spectrum() {
    let dir = temp_dir("exact");
    let out = run(&["exact", "--n", "4", "--epsilon", "1", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("report.json"));
    let eigenvalues = report["effective"]["eigenvalues"].as_array().unwrap();
    let targets = report["oracle"]["target_eigenvalues"].as_array().unwrap();
    assert_eq!(eigenvalues.len(), 4);
    for (a, b) in eigenvalues.iter().zip(targets.iter()) {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() < 1e-8);
    }
    assert!(report["oracle"]["mapping_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(report["gap"]["condition_met"].as_bool().unwrap(), false);
    assert!(report["toolkit_version"].is_string());
}

#[test]
fn unperturbed_run_gives_flat_ground_block() {
    let dir = temp_dir("flat");
    let out = run(&["exact", "--epsilon", "0", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let report = read_json(&dir.join("report.json"));
    for value in report["effective"]["eigenvalues"].as_array().unwrap() {
        assert!((value.as_f64().unwrap() + 6.0).abs() < 1e-9);
    }
}

#[test]
fn undersized_chain_is_a_usage_error() {
    let out = run(&["exact", "--n", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("at least 4 spins"), "stderr: {stderr}");
}

#[test]
fn oversized_register_hits_the_resource_cap() {
    let out = run(&["qpe", "--ancillas", "12"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn vqa_outputs_are_deterministic_per_config() {
    let dir = temp_dir("det");
    let args = [
        "vqa",
        "--backend",
        "g-shots",
        "--shots",
        "500",
        "--max-iter",
        "3",
        "--seed",
        "11",
        "--out",
    ];
    let mut first_args: Vec<&str> = args.to_vec();
    let dir_str = dir.to_str().unwrap();
    first_args.push(dir_str);
    assert!(run(&first_args).status.success());
    let trace = std::fs::read(dir.join("trace.csv")).unwrap();
    let summary = std::fs::read(dir.join("summary.json")).unwrap();
    assert!(run(&first_args).status.success());
    assert_eq!(trace, std::fs::read(dir.join("trace.csv")).unwrap());
    assert_eq!(summary, std::fs::read(dir.join("summary.json")).unwrap());

    // trace rows: header + initial point + 3 iterations, all spectra attached
    let text = String::from_utf8(trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("step,cost,theta_0"));
    assert!(!lines[4].ends_with(','));
}

#[test]
fn vqa_exact_backend_reports_high_fidelities() {
    let dir = temp_dir("vqa-exact");
    let out = run(&[
        "vqa",
        "--max-iter",
        "120",
        "--seed",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = read_json(&dir.join("summary.json"));
    for fidelity in summary["fidelities"].as_array().unwrap() {
        assert!(fidelity.as_f64().unwrap() > 0.95);
    }
    assert!(summary["best_cost"].as_f64().unwrap() < 1.0);
    assert_eq!(summary["reference_eigenvalues"].as_array().unwrap().len(), 4);
}

#[test]
fn qpe_report_shows_monotone_fidelities() {
    let dir = temp_dir("qpe");
    let out = run(&["qpe", "--ancillas", "3,5", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let report = read_json(&dir.join("qpe_report.json"));
    assert_eq!(report["monotone_improvement"].as_bool().unwrap(), true);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        for fidelity in row["state_fidelities"].as_array().unwrap() {
            assert!(fidelity.as_f64().unwrap() > 0.9);
        }
        assert!(row["reflection_flip_fidelity"].as_f64().unwrap() > 0.8);
    }
}

#[test]
fn nested_qpe_runs_and_reports() {
    let dir = temp_dir("nested");
    let out = run(&["qpe", "--nested", "--ancillas", "3,4", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("qpe_report.json"));
    assert_eq!(report["config"]["nested"].as_bool().unwrap(), true);
    // the inner approximation changes with l here, so monotonicity is not
    // guaranteed; the fidelities still have to be high
    for row in report["rows"].as_array().unwrap() {
        for fidelity in row["state_fidelities"].as_array().unwrap() {
            assert!(fidelity.as_f64().unwrap() > 0.95);
        }
    }
}

#[test]
fn config_file_applies_and_flags_override() {
    let dir = temp_dir("config");
    let config_path = dir.join("run.conf");
    std::fs::write(
        &config_path,
        "# benchmark instance\nn = 4\nepsilon = 0.5\nseed = 3\n",
    )
    .unwrap();
    let out = run(&[
        "exact",
        "--config",
        config_path.to_str().unwrap(),
        "--epsilon",
        "0", // flag wins over the file
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["config"]["epsilon"].as_f64().unwrap(), 0.0);
    assert_eq!(report["config"]["seed"].as_u64().unwrap(), 3);
}

#[test]
fn bad_config_key_is_a_usage_error() {
    let dir = temp_dir("badconfig");
    let config_path = dir.join("run.conf");
    std::fs::write(&config_path, "epslion = 0.5\n").unwrap();
    let out = run(&["exact", "--config", config_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn window_runs_use_exact_backend_or_fail_fast() {
    let dir = temp_dir("window");
    // mid-spectrum window through the exact pipeline
    let out = run(&["exact", "--k", "4", "--m", "12", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["effective"]["eigenvalues"].as_array().unwrap().len(), 12);

    // the sampled backend has no symmetry relations to decompose against
    let out = run(&["vqa", "--k", "4", "--m", "12", "--backend", "g-shots"]);
    assert_eq!(out.status.code(), Some(2));

    // and the reflection threshold needs spectrum above the window
    let out = run(&["qpe", "--k", "4", "--m", "12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_battery_passes() {
    let out = run(&["check"]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("all 9 checks passed"), "stdout: {stdout}");
}
