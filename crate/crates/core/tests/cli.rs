use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use npogd::harness::SWEEP_CSV_HEADER;
use tempfile::TempDir;

const SMALL_CONFIG: &str = r#"{
  "dimension": 2,
  "generator": {
    "losses": {"kind": "drifting-quadratic", "mu": 1.0, "drift": 0.05},
    "constraints": {"kind": "shrinking-halfspaces", "pool": 4}
  },
  "schedule": {"kind": "strongly-convex", "mu": 1.0},
  "horizons": [16, 32],
  "seeds": [1, 2],
  "workers": 2
}"#;

fn npogd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npogd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sweep_writes_csv_and_summary_next_to_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "small.json", SMALL_CONFIG);
    let csv = dir.path().join("small.csv");
    let out = npogd(&["sweep", "--config", s(&cfg), "--out", s(&csv)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(SWEEP_CSV_HEADER));
    assert_eq!(lines.count(), 4);
    // the config is left alone
    assert_eq!(std::fs::read_to_string(&cfg).unwrap(), SMALL_CONFIG);
    let summary = std::fs::read_to_string(dir.path().join("small.summary.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert!(v.get("config").is_some());
}

#[test]
fn sweep_to_stdout_matches_file_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "small.json", SMALL_CONFIG);
    let csv = dir.path().join("small.csv");
    assert!(npogd(&["sweep", "--config", s(&cfg), "--out", s(&csv)])
        .status
        .success());
    let out = npogd(&["sweep", "--config", s(&cfg), "--workers", "1"]);
    assert!(out.status.success());
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        std::fs::read_to_string(&csv).unwrap()
    );
}

#[test]
fn run_prints_one_trace_row_per_round() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "small.json", SMALL_CONFIG);
    let out = npogd(&["run", "--config", s(&cfg), "--horizon", "12", "--seed", "7"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "t,loss,violation,eta,e_norm,move,proj_residual,x0,x1,e0,e1"
    );
    assert_eq!(lines.len(), 13);
    assert!(lines[1].starts_with("1,"));
}

#[test]
fn project_reads_bodies_from_json() {
    let dir = TempDir::new().unwrap();
    let req = write(
        &dir,
        "p.json",
        r#"{"point": [2.0, 2.0], "bodies": [
            {"kind": "box", "lo": [-1.0, -1.0], "hi": [1.0, 1.0]},
            {"kind": "halfspace", "normal": [1.0, 1.0], "offset": 1.0}]}"#,
    );
    let out = npogd(&["project", "--config", s(&req)]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let p: Vec<f64> = serde_json::from_value(v["point"].clone()).unwrap();
    assert!(
        (p[0] - 0.5).abs() < 1e-9 && (p[1] - 0.5).abs() < 1e-9,
        "{p:?}"
    );
}

#[test]
fn disjoint_bodies_exit_with_failure() {
    let dir = TempDir::new().unwrap();
    let req = write(
        &dir,
        "p.json",
        r#"{"point": [0.0], "max_sweeps": 200, "bodies": [
            {"kind": "ball", "center": [-2.0], "radius": 1.0},
            {"kind": "ball", "center": [2.0], "radius": 1.0}]}"#,
    );
    let out = npogd(&["project", "--config", s(&req)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bad_configs_exit_with_config_code() {
    let dir = TempDir::new().unwrap();
    let unknown = write(
        &dir,
        "u.json",
        &SMALL_CONFIG.replace("\"workers\": 2", "\"wokers\": 2"),
    );
    let unsorted = write(
        &dir,
        "h.json",
        &SMALL_CONFIG.replace("[16, 32]", "[32, 16]"),
    );
    for cfg in [&unknown, &unsorted] {
        let out = npogd(&["sweep", "--config", s(cfg)]);
        assert_eq!(out.status.code(), Some(2), "{}", cfg.display());
    }
    let missing = dir.path().join("missing.json");
    assert_eq!(
        npogd(&["run", "--config", s(&missing)]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_fast_passes_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("report.json");
    let out = npogd(&["verify", "--out", s(&report)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(!v["checks"].as_array().unwrap().is_empty());
}
