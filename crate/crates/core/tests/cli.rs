use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use safedrive::risk_assessor::RiskThresholds;

fn safedrive(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safedrive"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_ingest_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&safedrive(&["synth", "--kind", "highway_traffic", "--seed", "3", "--out", "traffic.csv"], d));
    ok(&safedrive(&["ingest", "traffic.csv", "--out", "normalized.csv"], d));
    assert_eq!(
        fs::read_to_string(d.join("traffic.csv")).unwrap(),
        fs::read_to_string(d.join("normalized.csv")).unwrap()
    );
    ok(&safedrive(&["calibrate", "--dataset", "normalized.csv", "-n", "500", "--seed", "1", "--out", "t.json"], d));
    let t = RiskThresholds::load(d.join("t.json")).unwrap();
    assert_eq!(t.sample_count, 500);
    assert_eq!(t.seed, Some(1));
    assert!(0.0 <= t.t_low && t.t_low <= t.t_high);

    let config = r#"{"schema_version": 1, "thresholds_path": "t.json"}"#;
    fs::write(d.join("config.json"), config).unwrap();
    ok(&safedrive(
        &["--config", "config.json", "run", "--dataset", "builtin:highway", "--conditions", "both", "--out", "m.json"],
        d,
    ));
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("m.json")).unwrap()).unwrap();
    assert_eq!(metrics["scene_count"], 20);
}

#[test]
fn qpr_of_two_vehicles() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = r#"{
        "ego": {"id": 1, "class": "sedan", "x": 0, "y": 0, "heading": 0, "speed": 20, "width": 1.8, "length": 4.5, "wheelbase": 2.7},
        "others": [{"id": 2, "class": "truck", "x": 25, "y": 0, "heading": 0, "speed": 15, "width": 2.5, "length": 12, "wheelbase": 7.2}]
    }"#;
    fs::write(d.join("scene.json"), scene).unwrap();
    let out = safedrive(&["qpr", "--scene", "scene.json", "--heatmap", "map.pgm", "--csv", "map.csv"], d);
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["report"]["total"].as_f64().unwrap() > 0.0);
    assert!(v["text"].as_str().unwrap().contains("Vehicle 2"));
    assert!(fs::read(d.join("map.pgm")).unwrap().starts_with(b"P5"));
    assert!(fs::read_to_string(d.join("map.csv")).unwrap().lines().count() > 1);
}

#[test]
fn sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    ok(&safedrive(&["sweep", "--kind", "thw", "--out", "thw.csv"], dir.path()));
    let text = fs::read_to_string(dir.path().join("thw.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,label,total,front,rear"));
    assert_eq!(lines.count(), 15);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = safedrive(&["qpr", "--scene", "missing.json"], d);
    assert_eq!(out.status.code(), Some(2));

    fs::write(d.join("old.json"), r#"{"schema_version": 99}"#).unwrap();
    let out = safedrive(&["--config", "old.json", "sweep", "--kind", "thw", "--out", "x.csv"], d);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));

    let out = safedrive(&["run", "--conditions", "plain,fast", "--out", "m.json"], d);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_backend_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let config = r#"{"schema_version": 1,
        "backend": {"kind": "wire", "wire": {"base_url": "http://127.0.0.1:9", "max_retries": 0, "timeout_s": 2}}}"#;
    fs::write(d.join("config.json"), config).unwrap();
    let out = safedrive(
        &["--config", "config.json", "run", "--conditions", "plain", "--max-scenes", "1", "--out", "m.json"],
        d,
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("m.json").exists());
}
