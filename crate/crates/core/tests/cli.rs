use std::path::Path;
use std::process::{Command, Output};

fn kneeoa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kneeoa")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn metric(dir: &Path, key: &str) -> String {
    let text = std::fs::read_to_string(dir.join("metrics.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")).map(str::to_string))
        .unwrap_or_else(|| panic!("no metric {key} in\n{text}"))
}

#[test]
fn rf_prints_the_aperture() {
    let o = kneeoa(&["rf", "--preset", "fcn-center-best"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "66");
    let o = kneeoa(&["rf", "--preset", "fcn-pool3", "--layer", "conv7"]);
    assert_eq!(stdout(&o).trim(), "42");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(kneeoa(&["rf", "--bogus"]).status.code(), Some(2));
    assert_eq!(kneeoa(&["gradcheck"]).status.code(), Some(2));
    assert_eq!(kneeoa(&["gradcheck", "--op", "nope"]).status.code(), Some(2));
    assert_eq!(kneeoa(&["rf", "--preset", "resnet"]).status.code(), Some(1));
    assert_eq!(kneeoa(&["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    let o = kneeoa(&["gradcheck", "--all", "--seeds", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().all(|l| l.ends_with("pass")));
    assert_eq!(metric(&out, "failed"), "0");
    assert!(out.join("run-config.json").exists());
}

#[test]
fn missing_dataset_reports_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = kneeoa(&["extract", "--data", "/nonexistent/set", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("/nonexistent/set"), "{err}");
}

#[test]
fn detect_requires_its_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(kneeoa(&["synth", "--out", data.to_str().unwrap(), "--count", "2"]).status.success());
    let out = dir.path().join("det");
    let o = kneeoa(&["detect", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--method", "template"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--train-data"));
}

#[test]
fn synth_extract_and_template_detection() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    assert!(kneeoa(&["synth", "--out", &p("train"), "--count", "12", "--seed", "3"]).status.success());
    assert!(kneeoa(&["synth", "--out", &p("test"), "--count", "4", "--seed", "4"]).status.success());
    assert_eq!(metric(&dir.path().join("train"), "images"), "12");

    let o = kneeoa(&["extract", "--data", &p("test"), "--out", &p("knees")]);
    assert!(o.status.success());
    assert_eq!(metric(&dir.path().join("knees"), "knees"), "8");
    let index = std::fs::read_to_string(dir.path().join("knees/knees.tsv")).unwrap();
    assert_eq!(index.lines().count(), 9);

    let o = kneeoa(&[
        "detect", "--data", &p("test"), "--out", &p("tpl"), "--method", "template", "--train-data", &p("train"),
        "--downscale", "0.5", "--stride", "2", "--region", "80x50",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let det = dir.path().join("tpl");
    assert_eq!(metric(&det, "detections"), "8");
    assert_eq!(metric(&det, "failures"), "0");
    let ji: f64 = metric(&det, "detection.ji_ge_0.5").parse().unwrap();
    assert!(ji >= 0.75, "template JI>=0.5 fraction {ji}");
}
