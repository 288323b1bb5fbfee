use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rollman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rollman")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(v).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn flat_roll_prints_a_passing_report() {
    let cfg = configs_dir().join("flat_roll.json");
    let out = rollman(&["roll", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    assert_eq!(report["tool"], "rollman");
    assert_eq!(report["command"], "roll");
    assert_eq!(report["status"], "ok");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn malformed_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ not json").unwrap();
    let unknown = write_config(dir.path(), "unknown.json", &json!({ "M": { "kind": "sphere", "dim": 2 }, "colour": 3 }));
    let missing = write_config(dir.path(), "missing.json", &json!({ "M": { "kind": "sphere", "dim": 2 } }));
    for path in [broken.to_str().unwrap(), &unknown, &missing] {
        let out = rollman(&["roll", "--config", path]);
        assert_eq!(out.status.code(), Some(2), "{path}");
        let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
        assert_eq!(err["error"]["code"], "config");
    }
    let out = rollman(&["roll", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn leaving_the_chart_is_a_computational_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "M": { "kind": "hyperbolic", "dim": 2 },
        "M_hat": { "kind": "euclidean", "dim": 2 },
        "control": { "type": "piecewise", "data": [{ "duration": 20.0, "u": [1.0, 0.0] }], "T": 20.0, "frame": "local" },
        "step": 0.01
    });
    let path = write_config(dir.path(), "escape.json", &cfg);
    let out_dir = dir.path().join("out");
    let out = rollman(&["roll", "--config", &path, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("roll.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "failed");
    assert!(report["result"]["exit"].is_object());
    assert!(report["failure"].as_str().unwrap().contains("left the chart"));
    assert!(out_dir.join("roll.csv").exists());
}

#[test]
fn failed_expectations_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(configs_dir().join("flat_roll.json")).unwrap()).unwrap();
    cfg["expect"] = json!({ "/closure": { "min": 1e6 } });
    let path = write_config(dir.path(), "strict.json", &cfg);
    let out = rollman(&["roll", "--config", &path]);
    assert_eq!(out.status.code(), Some(1));
    let report = stdout_json(&out);
    assert_eq!(report["status"], "failed");
    assert_eq!(report["checks"][0]["pass"], false);
}

#[test]
fn overrides_change_the_config_hash() {
    let cfg = configs_dir().join("flat_roll.json");
    let cfg = cfg.to_str().unwrap();
    let hash = |extra: &[&str]| {
        let mut args = vec!["roll", "--config", cfg];
        args.extend_from_slice(extra);
        stdout_json(&rollman(&args))["config_hash"].as_str().unwrap().to_string()
    };
    let base = hash(&[]);
    assert_eq!(base, hash(&[]));
    assert_ne!(base, hash(&["--seed", "3"]));
    assert_ne!(base, hash(&["--step", "0.002"]));
}

#[test]
fn every_shipped_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut names: Vec<_> = std::fs::read_dir(configs_dir()).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    for path in names {
        let raw: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let command = if raw.get("experiments").is_some() { "report" } else { "roll" };
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let out_dir = dir.path().join(&stem);
        let out = rollman(&[command, "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{stem}: {}", String::from_utf8_lossy(&out.stderr));
        let file = if command == "report" { "summary.json" } else { "roll.json" };
        let report: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join(file)).unwrap()).unwrap();
        assert_eq!(report["status"], "ok", "{stem}");
    }
}
