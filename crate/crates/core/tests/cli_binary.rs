use std::path::PathBuf;
use std::process::{Command, Output};

const EXE: &str = env!("CARGO_BIN_EXE_equibound");

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn equibound(args: &[&str]) -> Output {
    Command::new(EXE).args(args).env("EQUIBOUND_THREADS", "2").output().unwrap()
}

#[test]
fn gaussian_report_matches_the_golden_csv() {
    let config = golden("gaussian.toml");
    let out = equibound(&["run", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected = std::fs::read_to_string(golden("gaussian.csv")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
}

#[test]
fn csv_schema_lists_every_bound_once() {
    let out = equibound(&["run", "--samples", "2000", "--psbr", "1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("bound_name,kind,value,std_error,units,flags"));
    let names: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(names.len(), 18);
    assert_eq!(&names[..3], ["EE", "MI", "MPE"]);
}

#[test]
fn json_output_carries_metadata() {
    let out = equibound(&["run", "--samples", "2000", "--format", "json", "--units", "nats"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 18);
    assert_eq!(doc["metadata"]["samples"], 2000);
    assert_eq!(doc["metadata"]["model_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn same_seed_same_bytes_different_seed_different_bytes() {
    let a = equibound(&["run", "--samples", "3000", "--seed", "4"]).stdout;
    let b = equibound(&["run", "--samples", "3000", "--seed", "4"]).stdout;
    let c = equibound(&["run", "--samples", "3000", "--seed", "5"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn sweep_writes_one_row_per_bound_and_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = equibound(&["sweep", "--samples", "2000", "--psbr", "0.5,2", "--out", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 18);
}

#[test]
fn invalid_input_exits_with_status_one() {
    let out = equibound(&["run", "--samples", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = equibound(&["run", "--psbr", "1,2"]);
    assert_eq!(out.status.code(), Some(1));

    let out = Command::new(EXE).args(["run", "--samples", "100"]).env("EQUIBOUND_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "samples = 100\nunknown = 1\n").unwrap();
    let out = equibound(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown"));
}
