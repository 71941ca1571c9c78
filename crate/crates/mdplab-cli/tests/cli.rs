//! End-to-end tests of the binary: exit-code contract, file round-trips,
//! and deterministic experiment output.

use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TOY2: &str = r#"{
    "n_states": 2,
    "n_actions": 2,
    "discount": 0.5,
    "costs": [[1.5, 0.0], [2.0, 2.0]],
    "transitions": [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [0.0, 1.0]]]
}"#;

fn mdplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

/// Parses the `field,value` CSV report into a map.
fn csv_fields(text: &str) -> HashMap<String, String> {
    text.lines()
        .skip(1)
        .filter_map(|l| l.split_once(','))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn write_toy2(dir: &Path) -> String {
    let path = dir.join("toy2.json");
    std::fs::write(&path, TOY2).unwrap();
    path.display().to_string()
}

#[test]
fn solve_vi_reaches_the_optimum() {
    let dir = TempDir::new().unwrap();
    let path = write_toy2(dir.path());
    let out = mdplab(&["solve", "--input", &path, "--algorithm", "vi", "--epsilon", "1e-6", "--format", "csv"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let fields = csv_fields(&stdout(&out));
    assert_eq!(fields["converged"], "true");
    let v0: f64 = fields["value_0"].parse().unwrap();
    let v1: f64 = fields["value_1"].parse().unwrap();
    assert!((v0 - 2.0).abs() < 1e-5);
    assert!((v1 - 4.0).abs() < 1e-5);
    assert_eq!(fields["policy_0"], "1");
    assert_eq!(fields["policy_1"], "0");
}

#[test]
fn solve_with_zero_budget_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = write_toy2(dir.path());
    let out = mdplab(&["solve", "--input", &path, "--algorithm", "vi", "--max-iters", "0"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn solve_lp_primal_reports_objective_6() {
    let dir = TempDir::new().unwrap();
    let path = write_toy2(dir.path());
    let out = mdplab(&["solve", "--input", &path, "--algorithm", "lp-primal", "--format", "csv"]);
    assert_eq!(exit_code(&out), 0);
    let fields = csv_fields(&stdout(&out));
    let objective: f64 = fields["objective"].parse().unwrap();
    assert!((objective - 6.0).abs() < 1e-6);
}

#[test]
fn solve_lp_dual_extracts_the_optimal_policy() {
    let dir = TempDir::new().unwrap();
    let path = write_toy2(dir.path());
    let out = mdplab(&["solve", "--input", &path, "--algorithm", "lp-dual", "--format", "csv"]);
    assert_eq!(exit_code(&out), 0);
    let fields = csv_fields(&stdout(&out));
    assert_eq!(fields["policy_0"], "1");
    let objective: f64 = fields["objective"].parse().unwrap();
    assert!((objective - 6.0).abs() < 1e-6);
}

#[test]
fn solve_writes_an_iteration_trace() {
    let dir = TempDir::new().unwrap();
    let path = write_toy2(dir.path());
    let trace = dir.path().join("trace.csv");
    let out = mdplab(&[
        "solve", "--input", &path, "--algorithm", "pi",
        "--output", trace.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("iteration,residual,policy_changes\n"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn invalid_inputs_exit_1() {
    // unreadable path
    let out = mdplab(&["solve", "--input", "/nonexistent/x.json", "--algorithm", "vi"]);
    assert_eq!(exit_code(&out), 1);
    // unknown algorithm is a usage error
    let dir = TempDir::new().unwrap();
    let path = write_toy2(dir.path());
    let out = mdplab(&["solve", "--input", &path, "--algorithm", "quantum"]);
    assert_eq!(exit_code(&out), 1);
    // malformed document naming the missing field
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"n_states": 1, "n_actions": 1, "costs": [[0.0]], "transitions": [[[1.0]]]}"#).unwrap();
    let out = mdplab(&["solve", "--input", bad.to_str().unwrap(), "--algorithm", "vi"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("discount"));
    // validation failure naming the offending row
    let invalid = dir.path().join("invalid.json");
    std::fs::write(
        &invalid,
        r#"{"n_states": 1, "n_actions": 1, "discount": 0.5, "costs": [[0.0]], "transitions": [[[0.9]]]}"#,
    )
    .unwrap();
    let out = mdplab(&["solve", "--input", invalid.to_str().unwrap(), "--algorithm", "vi"]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("(0, 0)"));
    // bad generator spec
    let out = mdplab(&["generate", "--generate", "mc90:n=7", "--output", dir.path().join("x.json").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn generate_round_trips_through_solve() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("fig2.json");
    let out = mdplab(&["generate", "--generate", "fig2:gamma=0.9", "--output", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let out = mdplab(&["solve", "--input", path.to_str().unwrap(), "--algorithm", "pi", "--format", "csv"]);
    assert_eq!(exit_code(&out), 0);
    let fields = csv_fields(&stdout(&out));
    // optimal action at state 0 is the jump (index 1) at cost 8.1
    assert_eq!(fields["policy_0"], "1");
    let v0: f64 = fields["value_0"].parse().unwrap();
    assert!((v0 - 8.1).abs() < 1e-9);
}

#[test]
fn export_lp_writes_the_advertised_shapes() {
    let dir = TempDir::new().unwrap();
    let path = write_toy2(dir.path());
    let primal = dir.path().join("toy2-primal.lp");
    let out = mdplab(&["export-lp", "--input", &path, "--which", "primal", "--output", primal.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let text = std::fs::read_to_string(&primal).unwrap();
    assert!(text.starts_with("Maximize\n"));
    assert_eq!(text.matches("<=").count(), 4);

    let dual = dir.path().join("toy2-dual.lp");
    let out = mdplab(&["export-lp", "--input", &path, "--which", "dual", "--output", dual.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0);
    let text = std::fs::read_to_string(&dual).unwrap();
    assert_eq!(text.matches(">= 0").count(), 4);
    assert_eq!(text.matches("flow_").count(), 2);

    let out = mdplab(&["export-lp", "--input", "/nonexistent.json", "--which", "primal", "--output", dir.path().join("x.lp").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn experiment_csv_is_deterministic_and_versioned() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = mdplab(&[
            "experiment", "--kind", "cross-check", "--num-seeds", "5",
            "--max-states", "4", "--max-actions", "2",
            "--output", path.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    let ca = std::fs::read(&a).unwrap();
    let cb = std::fs::read(&b).unwrap();
    assert_eq!(ca, cb, "identical command lines must produce byte-identical CSV");
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with(
        "seed,n_states,n_actions,gamma,vi_error,pi_error,mpi_error,lp_primal_error,lp_dual_error,max_disagreement\n"
    ));
}

#[test]
fn experiment_vi_gamma_scaling_hits_the_crossing() {
    let out = mdplab(&["experiment", "--kind", "vi-gamma-scaling", "--gamma-values", "0.9", "--format", "csv"]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[1], "22");
    assert_eq!(cells[2], "22");
}

#[test]
fn crosscheck_passes_within_tolerance() {
    let out = mdplab(&["crosscheck", "--num-seeds", "5", "--max-states", "4", "--max-actions", "2"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("crosscheck ok"));
}
