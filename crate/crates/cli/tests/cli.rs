use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn amrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amrt"))
        .args(args)
        .current_dir(root())
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("amrt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

const ADM: [&str; 2] = [
    "crates/core/fixtures/adm/objectives.adm",
    "crates/core/fixtures/adm/adaptation.adm",
];

#[test]
fn check_accepts_fixture() {
    let o = amrt(&["check", ADM[0], ADM[1], "--metamodel", "scenarios/shop-metamodel.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn check_reports_weight_sum() {
    let bad = tmp("weights.adm");
    let text = std::fs::read_to_string(root().join(ADM[0]))
        .unwrap()
        .replace("avail = 0.6", "avail = 0.5");
    std::fs::write(&bad, text).unwrap();
    let o = amrt(&[
        "check",
        bad.to_str().unwrap(),
        ADM[1],
        "--metamodel",
        "scenarios/shop-metamodel.json",
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains(": error: "));
}

#[test]
fn check_missing_file_is_usage_error() {
    let o = amrt(&["check", "nope.adm", "--metamodel", "scenarios/shop-metamodel.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn diagnostics_carry_file_line_and_column() {
    let bad = tmp("typo.adm");
    std::fs::write(&bad, "adaptation t;\ncondition X priority 1 lane fast { Cmponent c }\n").unwrap();
    let o = amrt(&[
        "check",
        bad.to_str().unwrap(),
        "--metamodel",
        "scenarios/shop-metamodel.json",
    ]);
    assert_eq!(code(&o), 1);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("typo.adm:2:36: error:"), "{out}");
}

#[test]
fn run_writes_trace_and_summary() {
    let trace = tmp("fr.jsonl");
    let o = amrt(&[
        "run",
        "--scenario",
        "scenarios/fault-restart.json",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["finalAvailability"], 1.0);
    let golden = std::fs::read(root().join("crates/cli/tests/golden/fault-restart.jsonl")).unwrap();
    assert_eq!(std::fs::read(&trace).unwrap(), golden);
}

#[test]
fn run_flags_override_the_file() {
    let o = amrt(&[
        "run",
        "--scenario",
        "scenarios/fault-restart.json",
        "--ticks",
        "6",
        "--engine",
        "coupled",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["tick"], 6);
    assert!(!text.contains("\"engine\":\"decoupled\""));
}

#[test]
fn zero_ticks_is_config_error() {
    let o = amrt(&["run", "--scenario", "scenarios/fault-restart.json", "--ticks", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_engine_is_config_error() {
    let o = amrt(&["run", "--scenario", "scenarios/fault-restart.json", "--engine", "fast"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn assess_formats() {
    let o = amrt(&["assess"]);
    assert_eq!(code(&o), 0);
    let o = amrt(&["assess", "--approach", "stitch", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("requirement,category,stitch\n"));
    assert_eq!(code(&amrt(&["assess", "--format", "html"])), 2);
    assert_eq!(code(&amrt(&["assess", "--approach", "acme"])), 2);
}

#[test]
fn bad_usage_exits_two() {
    assert_eq!(code(&amrt(&["frobnicate"])), 2);
}
