use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linkstack"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let s = ok(bin()
        .args(["generate", "--spec", "low-poisson-k2", "--seed", "4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap());
    assert!(s.starts_with("low-poisson-k2 n=512"));
    assert!(dir.path().read_dir().unwrap().count() >= 2);

    let s = ok(bin()
        .args(["oracle", "--spec", "low-poisson-k2", "--seed", "4", "--samples", "20000"])
        .output()
        .unwrap());
    assert!(s.contains("closed-form 0.75"), "{s}");
    assert!(s.contains("monte-carlo"));
}

#[test]
fn stack_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m");
    ok(bin()
        .args(["stack", "--seed", "7", "--negative-cap", "300", "--graph"])
        .arg(data("karate.edges"))
        .arg("--out")
        .arg(&m)
        .output()
        .unwrap());
    let report = dir.path().join("report.json");
    ok(bin()
        .args(["evaluate", "--seed", "7", "--model"])
        .arg(m.join("model.json"))
        .arg("--observed")
        .arg(m.join("observed.edges"))
        .arg("--holdout")
        .arg(m.join("holdout.edges"))
        .arg("--out")
        .arg(&report)
        .output()
        .unwrap());
    let text = std::fs::read_to_string(report).unwrap();
    assert!(text.contains("\"method\": \"stack:TM\""), "{text}");
}

#[test]
fn features_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f.csv");
    ok(bin()
        .args(["features", "--families", "T", "--seed", "1", "--graph"])
        .arg(data("florentine.edges"))
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.lines().next().unwrap().contains("JC"));
    assert_eq!(text.lines().count(), 1 + 15 * 14 / 2 - 20);
}

#[test]
fn failures_report_category() {
    let out = bin()
        .args(["stack", "--seed", "1", "--graph", "/no/such/file", "--out", "x"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error [input]"));

    let out = bin().args(["oracle", "--spec", "nope", "--seed", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let out = bin().args(["oracle", "--spec", "low-poisson-k2"]).output().unwrap();
    assert!(!out.status.success());
}
