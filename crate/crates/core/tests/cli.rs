use std::path::{Path, PathBuf};
use std::process::Command;

use hjrate::harness::{read_report, rows_csv, run_sweep, SweepConfig};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hjrate"));
    c.env_remove("HJRATE_SEED");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn small_sweep(out: &Path) -> Vec<String> {
    vec![
        "--config".into(),
        config("transport_lipschitz.json").to_string_lossy().into_owned(),
        "--override".into(),
        "problem.grid.N=256".into(),
        "--override".into(),
        "epsilons.count=4".into(),
        "--out".into(),
        out.to_string_lossy().into_owned(),
    ]
}

#[test]
fn sweep_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, workers) in [(a.path(), "1"), (b.path(), "2")] {
        let status = bin().arg("sweep").args(small_sweep(dir)).args(["--workers", workers]).output().unwrap();
        assert!(status.status.code().is_some_and(|c| c == 0 || c == 1), "{status:?}");
    }
    let csv_a = std::fs::read(a.path().join("sweep.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("sweep.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b);
}

#[test]
fn report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("sweep").args(small_sweep(dir.path())).output().unwrap();
    assert!(out.status.code().is_some_and(|c| c == 0 || c == 1));
    let path = dir.path().join("report.json");
    let report = read_report(&path).unwrap();
    let again = serde_json::to_string(&report).unwrap();
    let back: hjrate::harness::SweepReport = serde_json::from_str(&again).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), again);

    let rerender = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["report", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(rerender.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), out.status.code());
    assert_eq!(
        std::fs::read(rerender.path().join("sweep.csv")).unwrap(),
        std::fs::read(dir.path().join("sweep.csv")).unwrap()
    );
}

#[test]
fn certify_passes_on_shipped_config() {
    let out = bin().arg("certify").arg("--config").arg(config("stationary_eikonal.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn envelope_check_passes_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("envelope-check")
        .arg("--config")
        .arg(config("envelope.json"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_dir(dir.path()).unwrap().count() > 0);
}

#[test]
fn understated_constant_exits_with_violation() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("certify")
        .arg("--config")
        .arg(config("stationary_eikonal.json"))
        .args(["--override", "problem.hamiltonian.C_H=0.5", "--override", "samples=2000"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"epsilons\": 3}").unwrap();
    let out = bin().arg("sweep").arg("--config").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = bin().args(["sweep", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn library_sweep_matches_across_runs() {
    let path = config("heat.json");
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let (mut cfg, problem) = SweepConfig::from_json_value(value, path.parent()).unwrap();
    cfg.workers = Some(1);
    let first = rows_csv(&run_sweep(&cfg, &problem).unwrap().rows).unwrap();
    cfg.workers = Some(3);
    let second = rows_csv(&run_sweep(&cfg, &problem).unwrap().rows).unwrap();
    assert_eq!(first, second);
}
