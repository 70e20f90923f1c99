use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn pdl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdl")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn with_fixtures() -> TempDir {
    let dir = TempDir::new().unwrap();
    let o = pdl(dir.path(), &["fixtures"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir
}

#[test]
fn fixtures_are_written() {
    let dir = with_fixtures();
    for name in ["g1", "g2", "noisy_g1", "ritel_small"] {
        assert!(dir.path().join(format!("{name}.json")).exists(), "{name}");
    }
    assert_eq!(code(&pdl(dir.path(), &["fixtures", "--name", "nope"])), 2);
}

#[test]
fn analyze_writes_report_and_dot() {
    let dir = with_fixtures();
    let o = pdl(dir.path(), &["analyze", "--game", "g1.json", "--algo", "itel", "--dot", "g1.dot", "--out", "g1_report.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dot = std::fs::read_to_string(dir.path().join("g1.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("g1_report.json")).unwrap()).unwrap();
    assert_eq!(report["paths_agree"], serde_json::json!(true));
}

#[test]
fn simulation_needs_a_seed() {
    let dir = with_fixtures();
    let o = pdl(dir.path(), &["simulate", "--game", "g1.json", "--algo", "itel", "--epsilon", "0.1", "--steps", "100"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn reports_are_byte_identical() {
    let dir = with_fixtures();
    let args = ["simulate", "--game", "g2.json", "--algo", "iodl", "--epsilon", "0.1", "--steps", "5000", "--seed", "3", "--replicates", "2"];
    let a = pdl(dir.path(), &args);
    let b = pdl(dir.path(), &args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn occupancy_csv_has_header() {
    let dir = with_fixtures();
    let o = pdl(
        dir.path(),
        &["simulate", "--game", "g1.json", "--algo", "itel", "--epsilon", "0.1", "--steps", "1000", "--seed", "1", "--csv", "occ.csv"],
    );
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.path().join("occ.csv")).unwrap();
    assert!(text.starts_with("state,fraction\n"));
}

#[test]
fn strict_noise_margin_is_a_config_error() {
    let dir = with_fixtures();
    let args = ["analyze", "--game", "ritel_small.json", "--algo", "ritel", "--delta", "1/4", "--tau0", "4"];
    let lax = pdl(dir.path(), &args);
    assert_eq!(code(&lax), 0, "{}", String::from_utf8_lossy(&lax.stderr));
    assert!(String::from_utf8_lossy(&lax.stderr).contains("warning"));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(code(&pdl(dir.path(), &strict)), 2);
}

#[test]
fn strict_bound_sum_is_a_config_error() {
    let dir = with_fixtures();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"game": "g1.json", "algorithm": "itel", "strict": true,
            "policy": {"F": {"phi": 0.25, "psi": 0.2}, "G": {"phi": 0.5, "psi": 0.4}, "c_F": 0.95, "F0": 0.6, "G0": 0.6}}"#,
    )
    .unwrap();
    let o = pdl(dir.path(), &["analyze", "--config", "run.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn unknown_config_key_is_named() {
    let dir = with_fixtures();
    std::fs::write(dir.path().join("run.json"), r#"{"game": "g1.json", "algorithm": "itel", "sead": 1}"#).unwrap();
    let o = pdl(dir.path(), &["analyze", "--config", "run.json"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("sead"));
}

#[test]
fn missing_game_file_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let o = pdl(dir.path(), &["analyze", "--game", "absent.json", "--algo", "itel"]);
    assert_ne!(code(&o), 0);
}
