use std::path::Path;
use std::process::{Command, Output};

use fbmoo_cli::{run_experiment, ExperimentConfig, FunctionSpec, CATALOG};

fn fbmoo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbmoo")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn strip_timing(json: &str) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(json).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("timestamp");
    obj.remove("runtime_ms");
    v
}

#[test]
fn list_has_catalog() {
    let out = fbmoo(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 7);
    for e in CATALOG {
        assert!(text.contains(e.name));
        assert!(!e.result.is_empty());
    }
    assert_eq!(text, String::from_utf8(fbmoo(&["list"]).stdout).unwrap());
}

#[test]
fn run_sharpness_passes_and_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    let cfg = write_config(
        dir.path(),
        "sharp.json",
        &format!(
            r#"{{"experiment": "sharpness", "resolution": 10, "p": ["4"], "r": [2], "s": "inf",
                "output": {:?}, "csv": {:?}}}"#,
            report, csv
        ),
    );
    let out = fbmoo(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = std::fs::read_to_string(&report).unwrap();
    assert!(rep.contains("\"slope\""));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("series,index,value"));
}

#[test]
fn failing_experiment_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // a zero hull constant makes the weak-type bound unattainable
    let cfg = write_config(
        dir.path(),
        "weak.json",
        r#"{"experiment": "maximal_weak_type", "resolution": 8,
            "functions": [{"kind": "indicator", "a": 0.0, "b": 0.5}],
            "tolerances": {"hull_constant": 0.0}}"#,
    );
    assert_eq!(fbmoo(&["run", &cfg]).status.code(), Some(1));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let out = fbmoo(&["run", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let bad = write_config(dir.path(), "bad.json", r#"{"experiment": "sharpness", "p": ["2"], "r": ["4"]}"#);
    let out = fbmoo(&["run", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(r,s) ⪯ (p,p̃)"));

    let unknown = write_config(dir.path(), "u.json", r#"{"experiment": "nope"}"#);
    assert_eq!(fbmoo(&["run", &unknown]).status.code(), Some(2));

    let big = write_config(dir.path(), "big.json", r#"{"experiment": "haar_system", "resolution": 21}"#);
    let out = fbmoo(&["run", &big]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds"));

    let typo = write_config(dir.path(), "t.json", r#"{"experiment": "haar_system", "resolutoin": 8}"#);
    assert_eq!(fbmoo(&["run", &typo]).status.code(), Some(2));
}

#[test]
fn dump_function_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let out = fbmoo(&[
        "dump-function",
        r#"{"kind": "indicator", "a": 0.0, "b": 0.5, "resolution": 3}"#,
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0], "index,value");
    let f = fbmoo_core::GridFunction::read_csv(text.as_bytes()).unwrap();
    assert_eq!(f.values(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);

    let spec = write_config(dir.path(), "spec.json", r#"{"kind": "haar", "level": 1, "index": 1}"#);
    assert!(fbmoo(&["dump-function", &spec, csv.to_str().unwrap()]).status.success());

    let out = fbmoo(&["dump-function", r#"{"kind": "wave"}"#, csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_config_same_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for run in 0..2 {
        let out_path = dir.path().join(format!("r{run}.json"));
        let cfg = write_config(
            dir.path(),
            &format!("c{run}.json"),
            &format!(
                r#"{{"experiment": "pointwise_domination", "m": 2, "eta": "1/2", "resolution": 7,
                    "samples": 3, "seed": 11, "output": {:?}}}"#,
                out_path
            ),
        );
        let out = fbmoo(&["run", &cfg]);
        assert!(out.status.code().unwrap() <= 1);
        reports.push(std::fs::read_to_string(out_path).unwrap());
    }
    assert_eq!(strip_timing(&reports[0]), strip_timing(&reports[1]));
}

#[test]
fn thread_count_does_not_change_reports() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out_path = dir.path().join(format!("r{threads}.json"));
        let cfg = write_config(
            dir.path(),
            &format!("c{threads}.json"),
            &format!(
                r#"{{"experiment": "local_decay", "resolution": 8, "samples": 2, "seed": 5, "output": {:?}}}"#,
                out_path
            ),
        );
        let out = Command::new(env!("CARGO_BIN_EXE_fbmoo"))
            .args(["run", &cfg])
            .env("FBMOO_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.code().unwrap() <= 1);
        reports.push(std::fs::read_to_string(out_path).unwrap());
    }
    assert_eq!(strip_timing(&reports[0]), strip_timing(&reports[1]));
}

#[test]
fn every_catalog_entry_runs_at_small_scale() {
    for e in CATALOG {
        let cfg = ExperimentConfig {
            experiment: e.name.to_string(),
            resolution: Some(if e.name == "shift_paraproduct" { 6 } else { 7 }),
            depth: Some(5),
            samples: Some(3),
            pairs: Some(3),
            weight_powers: Some(vec![0.5, 1.0, 2.0]),
            resolutions: Some(vec![6, 7]),
            ..Default::default()
        };
        let report = run_experiment(&cfg).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        assert_eq!(report.name, e.name);
    }
}

#[test]
fn rational_and_numeric_eta_agree() {
    let a: ExperimentConfig = serde_json::from_str(r#"{"experiment": "x", "eta": "1/2"}"#).unwrap();
    let b: ExperimentConfig = serde_json::from_str(r#"{"experiment": "x", "eta": 0.5}"#).unwrap();
    assert_eq!(a.eta.unwrap().as_f64(), b.eta.unwrap().as_f64());
    let spec: FunctionSpec = serde_json::from_str(r#"{"kind": "random", "seed": 1}"#).unwrap();
    let f = spec.build(6).unwrap();
    assert_eq!(f, spec.build(6).unwrap());
}
