//! End-to-end checks of the `run` subcommand: exit codes, stderr wording,
//! and byte-level determinism of the emitted CSV.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ris-share");

/// Small scenario plus shortened loop caps so each sweep finishes quickly.
const FAST_CONFIG: &str = r#"{
    "n_elements": 2,
    "m_antennas": 2,
    "j_pns": 1,
    "p_pap_dbm": [10.0],
    "gamma_bar_dbm": [-115.0],
    "max_rounds": 3,
    "gld": { "k_bar": 20 },
    "npsp": { "n_itr": 50 }
}"#;

fn run_cli(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("failed to spawn the CLI binary")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, FAST_CONFIG).unwrap();
    path.to_str().unwrap().to_owned()
}

fn sweep_args<'a>(config: &'a str, out: &'a str, seed: &'a str) -> Vec<&'a str> {
    vec![
        "run", "--config", config, "--sweep", "gamma", "--trials", "2", "--seed", seed, "--out",
        out,
    ]
}

#[test]
fn identical_config_and_seed_give_byte_identical_csv() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");

    let a = run_cli(&sweep_args(&config, out_a.to_str().unwrap(), "17"));
    let b = run_cli(&sweep_args(&config, out_b.to_str().unwrap(), "17"));
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));

    let bytes_a = std::fs::read(&out_a).unwrap();
    let bytes_b = std::fs::read(&out_b).unwrap();
    assert!(!bytes_a.is_empty());
    assert_eq!(bytes_a, bytes_b);
}

#[test]
fn different_seed_changes_the_table() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");

    let a = run_cli(&sweep_args(&config, out_a.to_str().unwrap(), "17"));
    let b = run_cli(&sweep_args(&config, out_b.to_str().unwrap(), "18"));
    assert!(a.status.success());
    assert!(b.status.success());
    assert_ne!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap()
    );
}

#[test]
fn trace_reports_progress_without_perturbing_the_csv() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let quiet = dir.path().join("quiet.csv");
    let traced = dir.path().join("traced.csv");

    let a = run_cli(&sweep_args(&config, quiet.to_str().unwrap(), "17"));
    let mut args = sweep_args(&config, traced.to_str().unwrap(), "17");
    args.push("--trace");
    let b = run_cli(&args);
    assert!(a.status.success());
    assert!(b.status.success());

    let stderr = String::from_utf8_lossy(&b.stderr);
    assert!(
        stderr.contains("gamma_bar_dbm="),
        "expected per-point progress lines, got: {stderr}"
    );
    assert_eq!(
        std::fs::read(&quiet).unwrap(),
        std::fs::read(&traced).unwrap()
    );
}

#[test]
fn missing_config_file_fails_with_message() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out.csv");
    let missing = dir.path().join("nope.json");
    let r = run_cli(&sweep_args(
        missing.to_str().unwrap(),
        out.to_str().unwrap(),
        "1",
    ));
    assert!(!r.status.success());
    let stderr = String::from_utf8_lossy(&r.stderr);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
    assert!(!out.exists());
}

#[test]
fn malformed_json_fails_with_message() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, "{ not json").unwrap();
    let out = dir.path().join("out.csv");
    let r = run_cli(&sweep_args(
        config.to_str().unwrap(),
        out.to_str().unwrap(),
        "1",
    ));
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error:"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_key_fails_with_message() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(&config, r#"{"n_elements": 2, "power": 3.0}"#).unwrap();
    let out = dir.path().join("out.csv");
    let r = run_cli(&sweep_args(
        config.to_str().unwrap(),
        out.to_str().unwrap(),
        "1",
    ));
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error:"));
    assert!(!out.exists());
}

#[test]
fn unknown_sweep_name_fails_with_message() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out.csv");
    let r = run_cli(&[
        "run", "--config", &config, "--sweep", "bandwidth", "--trials", "1", "--seed", "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error:"));
    assert!(!out.exists());
}

#[test]
fn zero_trials_fails_and_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path());
    let out = dir.path().join("out.csv");
    let r = run_cli(&[
        "run", "--config", &config, "--sweep", "gamma", "--trials", "0", "--seed", "1", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("error:"));
    assert!(!out.exists());
}
