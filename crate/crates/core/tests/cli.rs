use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &[&str] = &["--set", "grid.M=64", "--set", "solve.N_t=16"];

fn sccontrol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sccontrol")).args(args).output().expect("binary runs")
}

fn run_dir(out: &Output) -> PathBuf {
    let stdout = String::from_utf8_lossy(&out.stdout);
    PathBuf::from(stdout.lines().next().expect("run directory on the first line"))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn args(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

#[test]
fn unknown_key_exits_with_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"sensorz": 20}"#).unwrap();
    let out = sccontrol(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sensorz"));

    let out = sccontrol(&["solve", "--set", "solve.N_t"]);
    assert_eq!(out.status.code(), Some(2));
    let out = sccontrol(&["solve", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_with_partial_bundle() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap();
    let a = with(SMALL, &["--out", out_dir, "--set", "train.eta0=1e6", "--set", "train.epochs=50", "--set", "net.mlp.hidden=[8]"]);
    let out = sccontrol(&[&["train"], args(&a).as_slice()].concat());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    let manifest = json(&dir.join("manifest.json"));
    assert_eq!(manifest["partial"], true);
    assert!(manifest["error"].as_str().unwrap().contains("iteration"));
    assert!(dir.join("loss_history.csv").is_file());
    assert!(dir.join("config.json").is_file());
}

#[test]
fn solve_writes_bundle_and_report_lists_it() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap();
    let a = with(SMALL, &["--out", out_dir]);
    let out = sccontrol(&[&["solve"], args(&a).as_slice()].concat());
    assert!(out.status.success());
    let dir = run_dir(&out);
    let metrics = json(&dir.join("metrics.json"));
    assert!(metrics["norm_drift"].as_f64().unwrap() < 1e-12);
    let terminal = fs::read_to_string(dir.join("terminal.csv")).unwrap();
    assert_eq!(terminal.lines().count(), 65);
    assert!(terminal.starts_with("x,re,im,density,current"));

    let out = sccontrol(&["report", "--out", out_dir]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("norm_drift"));
}

#[test]
fn generate_data_for_test2() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap();
    let a = with(SMALL, &["--out", out_dir, "--set", "problem=test2", "--set", "sensors=10", "--set", "test2.m_eval=16"]);
    let out = sccontrol(&[&["generate-data"], args(&a).as_slice()].concat());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = run_dir(&out);
    let lines = fs::read_to_string(dir.join("dataset.jsonl")).unwrap().lines().count();
    assert_eq!(lines, 8 * 16);
    let header = json(&dir.join("observations.json"));
    assert_eq!(header["nodes"].as_array().unwrap().len(), 8);
    assert_eq!(header["sigma"], 0.05);
    let body = fs::read_to_string(dir.join("observations.csv")).unwrap();
    assert_eq!(body.lines().count(), 1 + 8 * 10);
}

#[test]
fn plane_wave_convergence_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let a = with(SMALL, &["--out", tmp.path().to_str().unwrap(), "--set", "convergence.potential=constant_plane_wave", "--set", "convergence.steps=[1,3,9]"]);
    let out = sccontrol(&[&["convergence"], args(&a).as_slice()].concat());
    assert!(out.status.success());
    let dir = run_dir(&out);
    assert!(json(&dir.join("metrics.json"))["max_error"].as_f64().unwrap() < 1e-12);
    assert_eq!(fs::read_to_string(dir.join("convergence.csv")).unwrap().lines().count(), 4);
}

#[test]
fn flat_potential_has_no_regularity_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let a = with(SMALL, &["--out", tmp.path().to_str().unwrap(), "--set", "regularity.potential=flat", "--set", "quadrature=4"]);
    let out = sccontrol(&[&["regularity"], args(&a).as_slice()].concat());
    assert!(out.status.success());
    let dir = run_dir(&out);
    assert_eq!(json(&dir.join("metrics.json"))["slope"], "undefined");
    let csv = fs::read_to_string(dir.join("regularity.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",undefined")));
}

#[test]
fn seeded_training_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().to_str().unwrap();
    let base = with(
        SMALL,
        &["--out", out_dir, "--set", "problem=test1_sgld_noisy", "--set", "net.mlp.hidden=[6]", "--set", "train.eta0=1e-6", "--set", "train.epochs=30", "--set", "train.burn_in=10", "--set", "train.thin=2"],
    );
    let go = |seed: &str| {
        let a = with(&args(&base), &["--seed", seed]);
        let out = sccontrol(&[&["train"], args(&a).as_slice()].concat());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        run_dir(&out)
    };
    let (a, b, c) = (go("4"), go("4"), go("5"));
    for f in ["samples.json", "loss_history.csv", "potential.csv", "metrics.json", "observations.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("samples.json")).unwrap(), fs::read(c.join("samples.json")).unwrap());
    assert_eq!(json(&a.join("config.json"))["seed"], 4);
}
