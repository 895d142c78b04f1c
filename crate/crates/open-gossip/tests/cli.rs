//! End-to-end checks of the command-line binary: argument handling, file
//! output, format selection, and the documented exit codes (0 success,
//! 2 configuration error, 3 runtime failure).

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_open-gossip"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("open-gossip-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn spectrum_preset_prints_csv_and_exits_zero() {
    let out = bin().args(["spectrum", "--preset", "fig3"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# command: spectrum"), "metadata must lead the output");
    assert!(text.contains("\nn,lambda_g,lambda_r,r1,r2,"), "header row missing");
}

#[test]
fn simulate_writes_csv_file() {
    let path = scratch("fig1.csv");
    let out = bin()
        .args(["simulate", "--preset", "fig1", "--out"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty(), "file output must not echo to stdout");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# command: simulate"));
    assert!(text.contains("\nt,"), "sample rows missing");
}

#[test]
fn json_format_is_valid_json() {
    let out = bin()
        .args(["spectrum", "--preset", "fig1", "--format", "json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(doc["metadata"]["command"] == "spectrum");
    assert!(doc["columns"].as_array().unwrap().iter().any(|c| c == "r1"));
}

#[test]
fn seed_flag_changes_data_and_same_seed_reproduces() {
    let run = |seed: &str| {
        let out = bin()
            .args(["simulate", "--preset", "fig1", "--seed", seed])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        out.stdout
    };
    let a = run("7");
    let b = run("7");
    let c = run("8");
    assert_eq!(a, b, "same seed must reproduce byte-identically");
    assert_ne!(a, c, "different seeds must give different paths");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = bin()
        .args(["analyze", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty(), "a diagnostic must be printed");
}

#[test]
fn invalid_config_contents_are_a_config_error() {
    let path = scratch("bad.json");
    std::fs::write(&path, "{\"mode\": \"fixed\", \"n\": 0}").unwrap();
    let out = bin().args(["analyze", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("n must be at least 1"), "diagnostic was: {msg}");
}

#[test]
fn config_and_preset_together_are_rejected() {
    let path = scratch("unused.json");
    std::fs::write(&path, "{}").unwrap();
    let out = bin()
        .args(["simulate", "--preset", "fig1", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn neither_config_nor_preset_is_rejected() {
    let out = bin().args(["simulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unwritable_output_path_is_a_runtime_failure() {
    let out = bin()
        .args([
            "spectrum",
            "--preset",
            "fig1",
            "--out",
            "/nonexistent-dir/deep/out.csv",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_file_roundtrips_through_the_binary() {
    let config = scratch("spec.json");
    std::fs::write(
        &config,
        r#"{
            "mode": "fixed",
            "n": 4,
            "lambda_g": 9.0,
            "lambda_r": 1.0,
            "t_end": 1.0,
            "grid_step": 0.5,
            "seed": 11
        }"#,
    )
    .unwrap();
    let out = bin().args(["analyze", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# n: 4"));
    assert!(text.contains("fixed_point_variance"), "stationary metadata missing");
}
