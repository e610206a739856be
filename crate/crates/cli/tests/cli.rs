use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dcp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("DCP_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn synth_writes_requested_length_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let o = dcp(&["synth", "--length", "500", "--seed", "7", "--out", name], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a.lines().count(), 501);
    assert!(a.starts_with("t,y\n"));
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
}

#[test]
fn synth_rejects_short_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(&["synth", "--length", "10"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("synthetic.csv").exists());
}

#[test]
fn decompose_reconstructs_series() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dcp(&["synth", "--length", "600", "--out", "s.csv"], dir.path()).status.success());
    let o = dcp(
        &["decompose", "--input", "s.csv", "--period", "30", "--out", "c.csv", "--robust"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,y,trend,seasonal,remainder");
    let mut worst = 0.0f64;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        worst = worst.max((v[1] - v[2] - v[3] - v[4]).abs() / v[1].abs().max(1.0));
    }
    assert!(worst < 1e-9, "residual {worst}");
    assert!(stdout(&o).contains("max relative reconstruction residual"));
}

#[test]
fn decompose_rejects_oversized_period() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dcp(&["synth", "--length", "100", "--out", "s.csv"], dir.path()).status.success());
    let o = dcp(&["decompose", "--input", "s.csv", "--period", "80"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("period"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"dataset": {"synthetic": {"length": 300}}, "entries": [{"raw": "EnbPI"}], "alpa": 0.1}"#,
    )
    .unwrap();
    let o = dcp(&["run", "--config", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("alpa"), "{}", stderr(&o));
}

#[test]
fn missing_input_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let o = dcp(&["decompose", "--input", "nope.csv", "--period", "4"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.csv"));
    let o = dcp(&["sweep", "--config", "nope.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

fn write_config(dir: &Path) {
    fs::write(
        dir.join("cfg.json"),
        r#"{
  "output_dir": "from-config",
  "dataset": {"csv": {"path": "s.csv", "schema": {"value_col": "y", "period": 30}}},
  "entries": [
    {"raw": "ACI"},
    {"trend": "EnbPI", "season": "ExpLocal", "remainder": "CV+"}
  ],
  "alphas": [0.1, 0.2],
  "seeds": [0, 1],
  "record_runtime": false,
  "hyper_params": {"lag_order": 1}
}"#,
    )
    .unwrap();
}

#[test]
fn sweep_and_run_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dcp(&["synth", "--length", "600", "--out", "s.csv"], dir.path()).status.success());
    write_config(dir.path());

    let o = dcp(&["--workers", "2", "sweep", "--config", "cfg.json"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("from-config");
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 2 * 2 * 2);
    assert!(out.join("summary.json").exists());
    assert_eq!(fs::read_dir(out.join("intervals")).unwrap().count(), 8);

    // rerun is byte-identical
    let o = dcp(&["sweep", "--config", "cfg.json", "--out", "again"], dir.path());
    assert!(o.status.success());
    assert_eq!(results, fs::read_to_string(dir.path().join("again/results.csv")).unwrap());

    // run: first alpha and seed only, directory from the environment
    let o = Command::new(env!("CARGO_BIN_EXE_dcp"))
        .args(["run", "--config", "cfg.json"])
        .current_dir(dir.path())
        .env("DCP_OUTPUT_DIR", "env-out")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let single = fs::read_to_string(dir.path().join("env-out/results.csv")).unwrap();
    assert_eq!(single.lines().count(), 3);
    assert!(single.lines().skip(1).all(|l| l.contains(",0.100000,0,")));
}

#[test]
fn partial_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dcp(&["synth", "--length", "600", "--out", "s.csv"], dir.path()).status.success());
    fs::write(
        dir.path().join("cfg.json"),
        r#"{
  "dataset": {"csv": {"path": "s.csv", "schema": {"value_col": "y", "period": 30}}},
  "entries": [{"raw": "EnbPI"}, {"trend": "EnbPI", "season": "BinaryLocal", "remainder": "CV+"}],
  "alphas": [0.1], "seeds": [0],
  "hyper_params": {"lag_order": 1, "neighborhood": 20}
}"#,
    )
    .unwrap();
    let o = dcp(&["sweep", "--config", "cfg.json", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(dir.path().join("r/results.csv").exists());
}
