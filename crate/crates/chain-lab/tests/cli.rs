//! End-to-end checks of the command-line interface: exit codes, output
//! formats, file writing, and byte-level reproducibility.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chain-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

#[test]
fn dim_single_site_prints_one_row() {
    let out = run(&["dim", "8", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "N,n,D\n8,3,0\n");
}

#[test]
fn dim_table_matches_known_values() {
    let out = run(&["dim", "5", "--all-n"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), "N,n,D\n5,1,0\n5,2,0\n5,3,4\n5,4,0\n5,5,0\n");
    assert!(stderr_of(&out).contains("S(5)"));
}

#[test]
fn dim_verify_reports_route_agreement() {
    let out = run(&["dim", "9", "2", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.starts_with("N,n,D_gcd,D_spectral,D_krylov,agree\n"));
    assert!(text.contains("9,2,2,2,2,true"));
}

#[test]
fn dim_json_format() {
    let out = run(&["dim", "8", "3", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid json");
    assert_eq!(parsed[0]["N"], 8);
    assert_eq!(parsed[0]["D"], 0);
}

#[test]
fn missing_site_is_an_input_error() {
    let out = run(&["dim", "8"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("damped site"));
}

#[test]
fn site_out_of_range_is_an_input_error() {
    let out = run(&["simulate", "--N", "5", "--n", "9", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oversized_step_is_an_input_error() {
    let out = run(&["simulate", "--N", "5", "--n", "3", "--dt", "10", "--t-end", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("admissible"));
}

#[test]
fn unknown_flag_is_an_input_error() {
    let out = run(&["--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("Usage"));
}

#[test]
fn simulate_is_byte_reproducible() {
    let args = [
        "simulate", "--N", "6", "--n", "2", "--seed", "42", "--t-end", "3", "--project", "minus",
    ];
    let first = run(&args);
    assert_eq!(first.status.code(), Some(0));
    assert!(!first.stdout.is_empty());
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);

    // The thread pool size must not leak into the output.
    let threaded = bin()
        .args(args)
        .env("CHAIN_LAB_THREADS", "3")
        .output()
        .expect("binary runs");
    assert_eq!(threaded.status.code(), Some(0));
    assert_eq!(first.stdout, threaded.stdout);
}

#[test]
fn simulate_writes_csv_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    let path = dir.path().join("traj.csv");
    let out = run(&[
        "simulate",
        "--N",
        "4",
        "--n",
        "2",
        "--seed",
        "7",
        "--t-end",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).is_empty(), "data goes to the file, not stdout");
    assert!(stderr_of(&out).contains("H(0)"));
    let written = std::fs::read_to_string(&path).expect("file written");
    assert!(written.starts_with("t,H,power\n"));
    assert!(written.lines().count() > 10);
}

#[test]
fn simulate_coords_extend_the_header() {
    let out = run(&[
        "simulate", "--N", "3", "--n", "1", "--seed", "1", "--t-end", "1", "--coords",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    assert!(text.starts_with("t,H,power,q_1,q_2,q_3,p_1,p_2,p_3\n"));
}

#[test]
fn scan_emits_ratio_columns_and_peaks() {
    let out = run(&["scan", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,S,S_over_N^0.5,S_over_N^1"));
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains("\n3,6.6666666666666663e-1,"));
    assert!(stderr_of(&out).contains("epsilon = 0.5"));
}

#[test]
fn avg_reports_the_three_statistics() {
    let out = run(&["avg", "100", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid json");
    assert_eq!(parsed["N0"], 100);
    let cumulative = parsed["cumulative"].as_f64().unwrap();
    assert!((cumulative - 3.7729528147328051e-2).abs() < 1e-15);
    assert!(parsed["ratio_to_log"].as_f64().unwrap() > 0.0);
}

#[test]
fn avg_verify_is_capped() {
    let out = run(&["avg", "50000", "--verify"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn decay_reports_matching_rates() {
    let out = run(&["decay", "--N", "4", "--n", "2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let parsed: serde_json::Value = serde_json::from_str(&stdout_of(&out)).expect("valid json");
    let ratio = parsed["rate_ratio"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.2, "rate_ratio = {ratio}");
    assert!(parsed["H_ratio"].as_f64().unwrap() < 1e-6);
}

#[test]
fn spectrum_lists_closed_form_eigenvalues() {
    let out = run(&["spectrum", "--N", "3", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("k,lambda_closed,lambda_numeric,rel_diff,vanishes_at_site")
    );
    let eigenvalues: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (lambda, expect) in eigenvalues.iter().zip([1.0, 2.0, 4.0]) {
        assert!((lambda - expect).abs() <= 1e-12, "{lambda} vs {expect}");
    }
    assert!(stderr_of(&out).contains("max relative eigenvalue residual"));
}
