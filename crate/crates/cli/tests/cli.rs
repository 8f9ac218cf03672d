//! End-to-end CLI checks: output shapes, exit codes, determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_branchguard"))
}

fn demo(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../demos")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn encode_and_check() {
    let out = run(&["encode", "5"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "319385");

    let out = run(&["check", "319385"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out).trim(), "valid (n=5)");

    let out = run(&["check", "319386"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout(&out).trim(), "invalid");
}

#[test]
fn compare_prints_symbols() {
    let out = run(&["compare", "lt", "3", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("35552"), "{text}");
    assert!(text.contains("True"), "{text}");
}

#[test]
fn usage_errors_exit_3() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(run(&["compare", "approx", "1", "2"]).status.code(), Some(3));
    assert_eq!(run(&["campaign"]).status.code(), Some(3));
    // Missing required arguments.
    assert_eq!(run(&["encode"]).status.code(), Some(3));
    assert_eq!(run(&["report"]).status.code(), Some(3));
}

fn compile_demo(name: &str, pipeline: &str, out_path: &Path) {
    let input = demo(name);
    let out = run(&[
        "compile",
        input.to_str().unwrap(),
        "--pipeline",
        pipeline,
        "-o",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn compile_run_and_fault_cycle() {
    let dir = std::env::temp_dir().join("branchguard-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let container = dir.join("ic.json");
    compile_demo("integer_compare.mir", "an+cfi", &container);

    // Fault-free run with equal default inputs: returns 1, exit 0.
    let out = run(&["run", container.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["status"], "returned");
    assert_eq!(doc["return"], 1);

    // Unequal inputs return 0.
    let out = run(&[
        "run",
        container.to_str().unwrap(),
        "--input",
        "r0=3",
        "--input",
        "r1=5",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["return"], 0);

    // Find the protected branch in the container text, force it, and
    // expect a detected CFI violation with exit code 2.
    let text = std::fs::read_to_string(&container).unwrap();
    let c: serde_json::Value = serde_json::from_str(&text).unwrap();
    let program = c["program"].as_str().unwrap();
    let cbr_dyn = program
        .lines()
        .filter(|l| !l.trim_start().starts_with("block") && !l.contains('{') && !l.contains('}'))
        .take_while(|l| !l.trim_start().starts_with("cbr"))
        .count();
    let fault = format!("branchforce@{cbr_dyn}=false");
    let out = run(&["run", container.to_str().unwrap(), "--fault", &fault]);
    assert_eq!(out.status.code(), Some(2));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["outcome"], "detected_cfi");
    assert_eq!(doc["trap"], "CfiViolation");

    // Out-of-range fault index is a usage error.
    let out = run(&["run", container.to_str().unwrap(), "--fault", "skip@99999"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn dup_pipeline_has_six_branches_on_path() {
    let dir = std::env::temp_dir().join("branchguard-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let container = dir.join("ic_dup.json");
    compile_demo("integer_compare.mir", "dup:6", &container);
    let c: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&container).unwrap()).unwrap();
    assert_eq!(c["pipeline"], "dup:6");
    let cbrs = c["program"].as_str().unwrap().matches("cbr ").count();
    // 1 original + 5 re-checks per edge.
    assert_eq!(cbrs, 11);
}

#[test]
fn campaign_exhaustive_trace_has_no_control_sdc_at_3_bits() {
    let out = run(&[
        "campaign",
        "--trace",
        "lt",
        "--bits",
        "3",
        "--mode",
        "exhaustive",
        "--pairs",
        "4",
        "--seed",
        "11",
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["counts"]["sdc_control"], 0);
    assert_eq!(doc["total"], 4 * (128 + 8128 + 341376));
}

#[test]
fn campaign_is_byte_identical_across_job_counts() {
    let a = run(&[
        "campaign",
        "--trace",
        "eq",
        "--bits",
        "4",
        "--mode",
        "mc",
        "--samples",
        "100000",
        "--seed",
        "7",
        "--jobs",
        "1",
    ]);
    let b = run(&[
        "campaign",
        "--trace",
        "eq",
        "--bits",
        "4",
        "--mode",
        "mc",
        "--samples",
        "100000",
        "--seed",
        "7",
        "--jobs",
        "8",
    ]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn report_tabulates_containers_and_campaigns() {
    let dir = std::env::temp_dir().join("branchguard-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let an = dir.join("rep_an.json");
    let dup = dir.join("rep_dup.json");
    compile_demo("integer_compare.mir", "an+cfi", &an);
    compile_demo("integer_compare.mir", "dup:6", &dup);

    let out = run(&["report", an.to_str().unwrap(), dup.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("an+cfi") && text.contains("dup:6"), "{text}");

    // The encoded build undercuts the duplication build in modeled cycles.
    let cycles = |p: &Path| -> u64 {
        let c: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        c["cycles_default_input"].as_u64().unwrap()
    };
    assert!(cycles(&an) < cycles(&dup));

    // CSV flavor.
    let out = run(&["report", "--format", "csv", an.to_str().unwrap()]);
    assert!(stdout(&out).starts_with("file,pipeline,instrs,bytes,cycles"));
}
