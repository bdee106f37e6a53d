//! End-to-end tests of the `mixtaint` binary against the committed fixtures.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mixtaint::{load_json, Criterion, FilterOutcome, Method, SampleCase, TaintResult};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn mixtaint(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixtaint")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) -> Output {
    let out = mixtaint(args);
    assert!(
        out.status.success(),
        "mixtaint {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn run_err(args: &[&str]) -> String {
    let out = mixtaint(args);
    assert!(!out.status.success(), "mixtaint {args:?} unexpectedly succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: "), "stderr was: {stderr}");
    stderr
}

#[test]
fn evaluate_writes_the_golden_table() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.txt");
    run_ok(&[
        "evaluate",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--case",
        &fixture("t1_case.json"),
        "--calibration",
        &fixture("t1_calibration.json"),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(&out_path).unwrap(),
        fs::read(golden("t1_report.txt")).unwrap(),
        "table report drifted from tests/golden/t1_report.txt"
    );
}

#[test]
fn evaluate_prints_the_golden_table_to_stdout() {
    let out = run_ok(&[
        "evaluate",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--case",
        &fixture("t1_case.json"),
        "--calibration",
        &fixture("t1_calibration.json"),
    ]);
    assert_eq!(out.stdout, fs::read(golden("t1_report.txt")).unwrap());
}

#[test]
fn evaluate_writes_the_golden_jsonl() {
    let out = run_ok(&[
        "evaluate",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--case",
        &fixture("t1_case.json"),
        "--calibration",
        &fixture("t1_calibration.json"),
        "--format",
        "jsonl",
    ]);
    assert_eq!(out.stdout, fs::read(golden("t1_report.jsonl")).unwrap());
}

#[test]
fn taint_then_filter_keeps_only_the_real_withdrawal() {
    let dir = tempfile::tempdir().unwrap();
    let result_path = dir.path().join("m1.json");
    let outcome_path = dir.path().join("outcome.json");
    run_ok(&[
        "taint",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--case",
        &fixture("t1_case.json"),
        "--method",
        "m1",
        "--out",
        result_path.to_str().unwrap(),
    ]);
    run_ok(&[
        "filter",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--result",
        result_path.to_str().unwrap(),
        "--case",
        &fixture("t1_case.json"),
        "--calibration",
        &fixture("t1_calibration.json"),
        "--out",
        outcome_path.to_str().unwrap(),
    ]);

    let case: SampleCase = load_json(fixture("t1_case.json")).unwrap();
    let outcome: FilterOutcome = load_json(&outcome_path).unwrap();
    let targets: BTreeSet<_> = case.target_outputs.iter().copied().collect();
    assert_eq!(outcome.retained.tainted_outputs, targets);
    assert_eq!(outcome.applied, Criterion::ALL.to_vec());
    assert_eq!(outcome.dropped.len(), 3, "three candidates should fail a criterion");
}

#[test]
fn taint_prints_json_to_stdout_when_out_is_omitted() {
    let out = run_ok(&[
        "taint",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--case",
        &fixture("t1_case.json"),
        "--method",
        "m1",
    ]);
    let result: TaintResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(result.method, Method::M1);
    assert_eq!(result.tainted_outputs.len(), 4);
}

#[test]
fn cluster_dumps_both_partitions() {
    let out = run_ok(&["cluster", "--chain", &fixture("t1_chain.jsonl")]);
    let expected = "\
# input-sharing
A
A2
B
C
C2
D
D2
M_recv
# output-sharing
A
A2 M_recv
B D2
C
C2 D
";
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}

#[test]
fn simulate_honours_the_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let chain = |name: &str| dir.path().join(name);
    for (seed, name) in [("1", "one.jsonl"), ("2", "two.jsonl")] {
        run_ok(&[
            "simulate",
            "--scenario",
            &fixture("demo_scenario.json"),
            "--seed",
            seed,
            "--out",
            chain(name).to_str().unwrap(),
            "--truth",
            dir.path().join("truth.json").to_str().unwrap(),
        ]);
    }
    assert_ne!(
        fs::read(chain("one.jsonl")).unwrap(),
        fs::read(chain("two.jsonl")).unwrap(),
        "different seeds must produce different chains"
    );
    assert!(dir.path().join("truth.json").exists());
}

#[test]
fn missing_chain_file_reports_a_readable_error() {
    let stderr = run_err(&[
        "evaluate",
        "--chain",
        "/nonexistent/chain.jsonl",
        "--case",
        &fixture("t1_case.json"),
        "--calibration",
        &fixture("t1_calibration.json"),
    ]);
    assert!(stderr.contains("/nonexistent/chain.jsonl"), "stderr was: {stderr}");
}

#[test]
fn unknown_case_id_lists_the_available_ids() {
    let stderr = run_err(&[
        "taint",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--case",
        &fixture("t1_case.json"),
        "--case-id",
        "nope",
        "--method",
        "m1",
    ]);
    assert!(stderr.contains("no case with id `nope`"), "stderr was: {stderr}");
    assert!(stderr.contains("t1"), "stderr should list the available ids: {stderr}");
}

#[test]
fn case_with_no_calibration_row_fails() {
    let stderr = run_err(&[
        "evaluate",
        "--chain",
        &fixture("t1_chain.jsonl"),
        "--case",
        &fixture("t1_case.json"),
        "--calibration",
        &fixture("calibrations.json"),
    ]);
    assert!(stderr.contains("reference-mixer"), "stderr was: {stderr}");
}
