//! End-to-end runs of the `qklab` binary.

use std::path::Path;
use std::process::{Command, Output};

fn qklab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qklab"))
        .args(args)
        .env_remove("QKLAB_WORKERS")
        .output()
        .expect("spawn qklab")
}

fn write_config(dir: &Path, body: serde_json::Value) -> String {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&body).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn tiny(out: &Path) -> serde_json::Value {
    serde_json::json!({
        "data": {"source": "synth", "task": "two-blob", "n_samples": 48, "d": 4, "seed": 3,
                 "separation": 0.2, "noise": 0.3},
        "splits": {"mode": "balanced", "count": 2, "train": 16, "val": 8, "test": 16},
        "feature_counts": [2, 4],
        "hpo": {"iterations": 4, "init_points": 3, "candidates": 32},
        "output_dir": out,
    })
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_pipeline_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(dir.path(), tiny(&out));

    for cmd in ["prepare", "experiment", "diagnose", "report"] {
        let o = qklab(&["--workers", "2", cmd, "-c", &cfg]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    for f in [
        "results.json",
        "summary.csv",
        "diagnostics.json",
        "diagnostics.csv",
        "report.md",
        "MANIFEST.json",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    // 2 splits × 2 counts × 2 protocols × 2 models
    assert_eq!(summary.lines().count(), 1 + 16);

    let results = std::fs::read(out.join("results.json")).unwrap();
    let again = qklab(&["experiment", "-c", &cfg]);
    assert!(again.status.success());
    assert_eq!(stderr(&again).matches("cached").count(), 16);
    assert_eq!(std::fs::read(out.join("results.json")).unwrap(), results);
}

#[test]
fn missing_config_is_exit_1() {
    let o = qklab(&["prepare", "-c", "/nonexistent/run.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_field_is_exit_1_and_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut body = tiny(&dir.path().join("run"));
    body["svm_tol"] = serde_json::json!(-1.0);
    let cfg = write_config(dir.path(), body);
    let o = qklab(&["prepare", "-c", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("svm_tol"), "{}", stderr(&o));
}

#[test]
fn diagnose_before_experiment_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), tiny(&dir.path().join("run")));
    assert!(qklab(&["prepare", "-c", &cfg]).status.success());
    assert_eq!(qklab(&["diagnose", "-c", &cfg]).status.code(), Some(2));
    assert_eq!(qklab(&["report", "-c", &cfg]).status.code(), Some(2));
}

#[test]
fn out_flag_overrides_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), tiny(&dir.path().join("unused")));
    let other = dir.path().join("other");
    let o = qklab(&["prepare", "-c", &cfg, "--out", other.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(other.join("prepare.json").is_file());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn bench_writes_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    let o = qklab(&[
        "bench",
        "--backend",
        "tn",
        "--ns",
        "4,8",
        "--size",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("bench_tn.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(out.join("bench_tn.json").is_file());
}

#[test]
fn bench_rejects_two_reps() {
    let dir = tempfile::tempdir().unwrap();
    let o = qklab(&["bench", "--reps", "2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
