use std::fs;
use std::path::Path;

use linkstack::experiment::{read_results, run_experiment, summarize, ExperimentConfig, RESULTS_HEADER};
use linkstack::Error;

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

fn config(out: &Path, extra: serde_json::Value) -> ExperimentConfig {
    let mut v = serde_json::json!({
        "inputs": [{"path": data("karate.edges"), "domain": "social"}],
        "seeds": [1, 2],
        "output_dir": out,
        "predictors": ["JC", "MDL-DCSBM"],
        "stacks": ["TM"],
        "negative_cap": 400,
        "saturation_ks": [1, 2, 3],
        "stack": {"trees": 20, "depths": [4, null], "min_leaf": [1]},
    });
    for (k, x) in extra.as_object().unwrap() {
        v[k] = x.clone();
    }
    ExperimentConfig::from_json(&v.to_string()).unwrap()
}

#[test]
fn experiment_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(dir.path(), serde_json::json!({}))).unwrap();
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    let text = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_HEADER);
    let rows = read_results(dir.path()).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    for r in &rows {
        assert!((0.0..=1.0).contains(&r.auc));
        assert!(r.oracle_auc.is_none() && r.gap.is_none());
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["columns"].as_array().unwrap().len() > 40);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(dir.path().join("cells").read_dir().unwrap().count() >= 2);

    let summary = summarize(&[dir.path().to_path_buf()]).unwrap();
    assert!(summary.iter().any(|s| s.group == "domain:social" && s.method == "stack:TM"));
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&config(a.path(), serde_json::json!({"seeds": [3], "workers": 1}))).unwrap();
    run_experiment(&config(b.path(), serde_json::json!({"seeds": [3], "workers": 3}))).unwrap();
    assert_eq!(
        fs::read(a.path().join("results.csv")).unwrap(),
        fs::read(b.path().join("results.csv")).unwrap()
    );
}

#[test]
fn synthetic_cells_report_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        serde_json::json!({"inputs": [], "synthetic_suite": ["low-poisson-k2"], "seeds": [0], "oracle_samples": 5000}),
    );
    let out = run_experiment(&cfg).unwrap();
    let tm = out.rows.iter().find(|r| r.method == "stack:TM").unwrap();
    let oracle = tm.oracle_auc.unwrap();
    assert!((oracle - 0.75).abs() < 1e-12);
    assert!((tm.gap.unwrap() - (oracle - tm.auc)).abs() < 1e-12);
}

#[test]
fn config_errors_are_categorized() {
    let e = ExperimentConfig::from_json(r#"{"seeds": [1]}"#).unwrap_err();
    assert_eq!(e.category(), "config");
    let e = ExperimentConfig::from_json(r#"{"seeds": [1], "output_dir": "x", "bogus": 1}"#).unwrap_err();
    assert_eq!(e.category(), "config");

    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), serde_json::json!({"inputs": [{"path": "/no/such/file"}]}));
    let e = run_experiment(&cfg).unwrap_err();
    assert!(matches!(e, Error::Io { .. }), "{e}");
    assert_eq!(e.category(), "input");
}
