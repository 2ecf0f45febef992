use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn condprep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_condprep"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = condprep(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn matrix(v: &Value) -> Vec<Vec<f64>> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|r| r.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect()
}

fn write_scenario(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn analyze_example1_is_pure_vacuum() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenarios().join("example1.json");
    run_ok(&["analyze", "--scenario", sc.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let doc = read_json(&dir.path().join("example1.analysis.json"));
    let rep = &doc["reports"][0];
    let v = matrix(&rep["V"]);
    assert!((v[0][0] - 0.5).abs() < 1e-10 && (v[1][1] - 0.5).abs() < 1e-10 && v[0][1].abs() < 1e-10);
    assert_eq!(rep["pure"]["verdict"], true);
    assert_eq!(rep["closed_loop_stable"], true);
}

#[test]
fn eta_override_and_sweep_lose_purity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let sc = scenarios().join("example1.json");
    run_ok(&["analyze", "--scenario", sc.to_str().unwrap(), "--out", out, "--eta", "0.5"]);
    let rep = &read_json(&dir.path().join("example1.analysis.json"))["reports"][0];
    assert_eq!(rep["eta"], 0.5);
    assert!(rep["pure"]["purity"].as_f64().unwrap() < 1.0 - 1e-6);

    let sweep = scenarios().join("eta_sweep.json");
    run_ok(&["analyze", "--scenario", sweep.to_str().unwrap(), "--out", out]);
    let reps = read_json(&dir.path().join("eta_sweep.analysis.json"))["reports"].clone();
    let purities: Vec<f64> = reps
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["pure"]["purity"].as_f64().unwrap())
        .collect();
    assert_eq!(purities.len(), 4);
    assert!((purities[0] - 1.0).abs() < 1e-8);
    assert!(purities[1..].iter().all(|p| *p < 1.0));
}

#[test]
fn uncoupled_system_is_not_detectable() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(
        dir.path(),
        "free.json",
        r#"{"name": "free", "system": {"m": 1, "G": [[1, 0], [0, 1]], "Lambda_re": [[0, 0]]}}"#,
    );
    let out = condprep(&["analyze", "--scenario", &sc, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("witness vector"), "{err}");
    assert!(!dir.path().join("free.analysis.json").exists());
}

#[test]
fn mixed_design_target_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(dir.path(), "mixed.json", r#"{"name": "mixed", "design": {"V_s": [[1, 0], [0, 1]]}}"#);
    let out = condprep(&["design", "--scenario", &sc, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn config_errors_exit_with_their_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write_scenario(dir.path(), "broken.json", "{ not json");
    assert_eq!(condprep(&["analyze", "--scenario", &broken]).status.code(), Some(2));
    let both = write_scenario(
        dir.path(),
        "both.json",
        r#"{"name": "b", "system": {"m": 1, "G": [0, 0, 0, 0], "Lambda_re": [1, 0]}, "design": {"V_s": [0.5, 0, 0, 0.5]}}"#,
    );
    assert_eq!(condprep(&["analyze", "--scenario", &both]).status.code(), Some(2));
    assert_eq!(condprep(&["analyze"]).status.code(), Some(2));
    let sc = scenarios().join("example1.json");
    let out = condprep(&["analyze", "--scenario", sc.to_str().unwrap(), "--eta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn squeezed_design_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let sc = scenarios().join("squeezed.json");
    run_ok(&["design", "--scenario", sc.to_str().unwrap(), "--out", out]);
    let design = read_json(&dir.path().join("squeezed.design.json"));
    assert!(design["relative_error"].as_f64().unwrap() < 1e-6);
    let target = matrix(&read_json(&sc)["design"]["V_s"]);

    let analysis_dir = dir.path().join("again");
    let system = dir.path().join("squeezed.system.json");
    run_ok(&["analyze", "--scenario", system.to_str().unwrap(), "--out", analysis_dir.to_str().unwrap()]);
    let rep = &read_json(&analysis_dir.join("squeezed.analysis.json"))["reports"][0];
    let v = matrix(&rep["V"]);
    let mut err = 0.0f64;
    let mut norm = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            err += (v[i][j] - target[i][j]).powi(2);
            norm += target[i][j].powi(2);
        }
    }
    assert!((err / norm).sqrt() < 1e-6);
    assert_eq!(rep["feedback_stable"], true);

    // Re-running the analysis reproduces the report exactly.
    let redo = dir.path().join("redo");
    run_ok(&["analyze", "--scenario", system.to_str().unwrap(), "--out", redo.to_str().unwrap()]);
    assert_eq!(
        fs::read_to_string(redo.join("squeezed.analysis.json")).unwrap(),
        fs::read_to_string(analysis_dir.join("squeezed.analysis.json")).unwrap()
    );
}

#[test]
fn simulate_writes_csv_with_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(
        dir.path(),
        "short.json",
        r#"{"name": "short", "outputs": ["trajectories"],
            "system": {"m": 1, "G": [[2, 0], [0, 0]], "Lambda_re": [[1, 0]], "Lambda_im": [[-1, 1]]},
            "sim": {"dt": 0.01, "T": 1, "n_traj": 50, "seed": 4, "feedback": "markovian", "x0": [1, 0], "samples": 4}}"#,
    );
    let out = dir.path().to_str().unwrap();
    run_ok(&["simulate", "--scenario", &sc, "--out", out]);
    let cov = fs::read_to_string(dir.path().join("short.covariance.csv")).unwrap();
    let mut lines = cov.lines();
    assert_eq!(lines.next().unwrap(), "t,V_1_1,V_1_2,V_2_1,V_2_2");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 101);
    let first: Vec<f64> = rows[0].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(first, [0.0, 0.5, 0.0, 0.0, 0.5]);
    let cell = rows[50].split(',').nth(1).unwrap();
    let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);

    let ens = fs::read_to_string(dir.path().join("short.ensemble.csv")).unwrap();
    assert!(ens.starts_with("t,mean_1,mean_2,mean_se_1,mean_se_2,Sigma_1_1,"));
    assert_eq!(ens.lines().count(), 1 + 5);
    let summary = read_json(&dir.path().join("short.summary.json"));
    assert_eq!(summary["feedback"], "markovian-fixed");
    assert_eq!(summary["seed"], 4);
    assert!(summary["worst_identity_residual"].is_null());
    let traj = fs::read_to_string(dir.path().join("short.trajectories.csv")).unwrap();
    assert_eq!(traj.lines().next().unwrap(), "t,trajectory,x_1,x_2");
    assert_eq!(traj.lines().count(), 1 + 50 * 5);

    // Same seed reproduces the ensemble byte for byte; a new seed does not.
    let again = dir.path().join("again");
    run_ok(&["simulate", "--scenario", &sc, "--out", again.to_str().unwrap()]);
    assert_eq!(ens, fs::read_to_string(again.join("short.ensemble.csv")).unwrap());
    let other = dir.path().join("other");
    run_ok(&["simulate", "--scenario", &sc, "--out", other.to_str().unwrap(), "--seed", "5"]);
    assert_ne!(ens, fs::read_to_string(other.join("short.ensemble.csv")).unwrap());
}

#[test]
fn oversized_step_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write_scenario(
        dir.path(),
        "coarse.json",
        r#"{"name": "coarse",
            "system": {"m": 1, "G": [[200, 0], [0, 0]], "Lambda_re": [[10, 0]], "Lambda_im": [[-10, 10]]},
            "sim": {"dt": 0.5, "T": 5, "n_traj": 4}}"#,
    );
    let out = condprep(&["simulate", "--scenario", &sc, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(7), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_fails_on_the_corrupted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = condprep(&["verify", "--only", "1", "--fixture", "flipped-m", "--out", out]);
    assert_eq!(bad.status.code(), Some(8));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("[FAIL] criterion  1"));
    let good = run_ok(&["verify", "--only", "1,2", "--out", out]);
    let text = String::from_utf8_lossy(&good.stdout);
    assert!(text.contains("[PASS] criterion  1") && text.contains("[PASS] criterion  2"));
    assert_eq!(read_json(&dir.path().join("verify.json"))["failed"], 0);
}
