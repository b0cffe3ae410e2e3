//! Runs the `agepop` binary against the bundled models and scenarios.

mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::model_path;

fn agepop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agepop")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn scenario(name: &str) -> String {
    format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn validate_and_exit_codes() {
    let ok = agepop(&["validate", path(&model_path("allee"))]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    let dir = tempfile::tempdir().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(model_path("logistic")).unwrap()).unwrap();
    v["c"] = serde_json::json!(0.01);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    let out = agepop(&["validate", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("FAIL"));

    let missing = agepop(&["r0", path(&dir.path().join("nope.json"))]);
    assert_ne!(missing.status.code(), Some(0));
}

#[test]
fn scalar_commands() {
    let r0: f64 = stdout(&agepop(&["r0", path(&model_path("logistic"))])).trim().parse().unwrap();
    assert!((r0 - 1.3618).abs() < 1e-3);
    let lambda: f64 = stdout(&agepop(&["malthusian", path(&model_path("logistic"))])).trim().parse().unwrap();
    assert!(lambda > 0.0);
}

#[test]
fn equilibria_and_stability_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let model = model_path("allee");
    let out = agepop(&["--out", path(dir.path()), "equilibria", path(&model), "--pmax", "20"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("equilibria.csv")).unwrap();
    assert!(csv.starts_with("P_star,Q_star,rho_star,residual\n"));
    assert_eq!(csv.lines().count(), 4);

    let out = agepop(&["--out", path(dir.path()), "stability", path(&model), "--equilibrium", "1", "--pmax", "20"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    assert!(csv.starts_with("re,im,residual,multiplicity\n"));
    let line = fs::read_to_string(dir.path().join("stability.txt")).unwrap();
    assert!(line.starts_with("classification=unstable"), "{line}");
}

#[test]
fn bound_and_allee_json() {
    let out = agepop(&["bound", path(&model_path("logistic"))]);
    let cert: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((cert["bound"].as_f64().unwrap() - 2.25).abs() < 1e-9);

    let out = agepop(&["allee", path(&model_path("allee")), "--cap", "20"]);
    let thr: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(thr["rho_star"].as_f64().unwrap() > 0.0);
    assert!(thr["r1"].as_f64().unwrap() < 1.0);
}

#[test]
fn simulate_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = agepop(&["--out", path(dir.path()), "--T", "40", "simulate", &scenario("logistic")]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("trajectory.csv")).unwrap();
    let first = read(&a);
    assert!(first.starts_with(b"t,rho,P,Q,iters\n"));
    assert_eq!(first, read(&b));
    assert!(a.path().join("outcome.json").exists());
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = agepop(&["--out", path(dir.path()), "--T", "100", "sweep", &scenario("fertility_sweep")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("value,R0,lambda,classification,rho_final"));
    assert_eq!(lines.count(), 7);
}
