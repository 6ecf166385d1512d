//! Drives the `cnqe` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use cnqe::cli::{parse_history_csv, Checkpoint, Summary, FOURIER_HEADER, STATS_HEADER};

const TINY: &str = r#"{
  "train": {"cnqe_iterations": 20, "eval_every": 10, "n_runs": 3, "qcnn_epochs": 2, "feature_map": "zz_unit"},
  "dataset": {"source": "blobs", "n_per_class": 8, "margin_sigma": 10, "seed": 2}
}"#;

fn cnqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cnqe"))
        .args(args)
        .env_remove("CNQE_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn error_json(out: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().last().expect("error line on stderr");
    serde_json::from_str(line).expect("stderr carries a JSON error")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn train_is_reproducible_and_artifacts_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tiny.json", TINY);
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let out = cnqe(&["train", "--config", &cfg, "--out", dir.to_str().unwrap(), "--threads", threads]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["summary.json", "history.csv", "checkpoint.json", "manifest.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name} differs between runs");
    }
    let summary: Summary = serde_json::from_str(&read(&a, "summary.json")).unwrap();
    assert_eq!(summary.cnqe_runs.len(), 3);
    assert_eq!(summary.classifier_runs.len(), 3);
    assert!(summary.median_run_id.is_some());
    let ckpt = Checkpoint::from_json(&read(&a, "checkpoint.json")).unwrap();
    assert_eq!(Some(ckpt.run_id), summary.median_run_id);
    assert_eq!(ckpt.qcnn_thetas.len(), 3);
    let history = parse_history_csv(&read(&a, "history.csv")).unwrap();
    assert!(history.iter().any(|e| e.phase == "cnqe") && history.iter().any(|e| e.phase == "qcnn"));
    assert!(a.join("run.log").is_file());

    let out = cnqe(&["train", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "99"]);
    assert!(out.status.success());
    assert_ne!(read(&a, "checkpoint.json"), read(&c, "checkpoint.json"));

    let out = cnqe(&["inspect", a.join("checkpoint.json").to_str().unwrap()]);
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
}

#[test]
fn config_errors_exit_2_with_json() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.json", r#"{"train": {"loss_kind": "cosine"}}"#);
    let out = cnqe(&["train", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["exit_code"], 2);
    assert_eq!(err["error"]["kind"], "config");

    let even = write(tmp.path(), "even.json", r#"{"train": {"n_runs": 4}}"#);
    assert_eq!(cnqe(&["train", "--config", &even]).status.code(), Some(2));
    assert_eq!(cnqe(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(cnqe(&["train", "--config", "/nonexistent/cfg.json"]).status.code(), Some(2));
}

#[test]
fn missing_data_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.cnqe");
    let cfg = write(
        tmp.path(),
        "raw.json",
        &format!(r#"{{"dataset": {{"source": "raw", "path": {:?}}}}}"#, missing.display().to_string()),
    );
    let out = cnqe(&["train", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["error"]["kind"], "data");

    let cifar = write(tmp.path(), "cifar.json", r#"{"dataset": {"source": "cifar10", "classes": ["frog", "ship"], "seed": 0}}"#);
    assert_eq!(cnqe(&["train", "--config", &cifar]).status.code(), Some(3));
}

#[test]
fn stats_and_fourier_check() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = write(
        tmp.path(),
        "acc.csv",
        "group,metric,value\nA,accuracy,0.91\nA,accuracy,0.93\nA,accuracy,0.92\nB,accuracy,0.81\nB,accuracy,0.84\nB,accuracy,0.80\n",
    );
    let out = cnqe(&["stats", &csv]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(STATS_HEADER));
    assert!(lines.next().unwrap().starts_with("A vs B,accuracy,"));

    let out = cnqe(&["fourier-check", "--samples", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some(FOURIER_HEADER));
    // H·RZ(x)·H has the frequencies ±½ in both amplitudes.
    assert_eq!(text.lines().count(), 1 + 4);

    let out = cnqe(&["fourier-check", "--kind", "zz_unit", "--qubits", "2", "--samples", "5", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(read(tmp.path(), "fourier.csv").starts_with(FOURIER_HEADER));
    assert_eq!(cnqe(&["fourier-check", "--kind", "zz9"]).status.code(), Some(2));
}

#[test]
fn help_and_version_exit_0() {
    assert!(cnqe(&["--help"]).status.success());
    assert!(cnqe(&["--version"]).status.success());
}
