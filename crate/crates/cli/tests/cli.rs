use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn monodyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_monodyn")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
    })
}

const PROJECTION: &str = r#"{"n":3,"entries":[[0,0.5,0.5],[0,1,0],[0,0,1]]}"#;
const JORDAN: &str = r#"{"n":2,"entries":[[1,1],[0,1]]}"#;
const THREE_CYCLE: &str = r#"{"n":3,"entries":[[0,1,0],[0,0,1],[1,0,0]]}"#;
const DOUBLING: &str = r#"{"n":1,"kind":"max_affine","rows":[[{"r":0,"p":[0]},{"r":0,"p":[2]}]]}"#;
const CONTRACTION: &str =
    r#"{"n":2,"kind":"max_affine","rows":[[{"r":1,"p":[0.5,0]},{"r":0,"p":[0,0.25]}],[{"r":-1,"p":[0.5,0.5]}]]}"#;

fn setup() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let path = dir.path().to_path_buf();
    (dir, path)
}

#[test]
fn jordan_block_is_unstable() {
    let (_d, dir) = setup();
    let out = monodyn(&["matrix", write(&dir, "j.json", JORDAN).to_str().unwrap(), "stable"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["stable"], Value::Bool(false));
}

#[test]
fn projection_normal_form_is_one_based() {
    let (_d, dir) = setup();
    let out = monodyn(&["matrix", write(&dir, "p.json", PROJECTION).to_str().unwrap(), "normal-form"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["C"], serde_json::json!([2, 3]));
    assert_eq!(v["U"], serde_json::json!([1]));
}

#[test]
fn three_cycle_cyclicity() {
    let (_d, dir) = setup();
    let out = monodyn(&["matrix", write(&dir, "c.json", THREE_CYCLE).to_str().unwrap(), "cyclicity"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["cyclicity"], Value::from(3));
}

#[test]
fn critical_graph_as_dot() {
    let (_d, dir) = setup();
    let out = monodyn(&["--format", "dot", "matrix", write(&dir, "c.json", THREE_CYCLE).to_str().unwrap(), "critical"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("digraph"));
    assert_eq!(text.matches("->").count(), 3);
}

#[test]
fn doubling_map_is_unstable_at_zero() {
    let (_d, dir) = setup();
    let out = monodyn(&["map", write(&dir, "m.json", DOUBLING).to_str().unwrap(), "certify"]);
    assert_eq!(json(&out)["outcome"], Value::from("Unstable"));
}

#[test]
fn meet_on_projection() {
    let (_d, dir) = setup();
    let map = r#"{"n":3,"kind":"max_affine","rows":[[{"r":0,"p":[0,0.5,0.5]}],[{"r":0,"p":[0,1,0]}],[{"r":0,"p":[0,0,1]}]]}"#;
    let path = write(&dir, "p.json", map);
    let out = monodyn(&["map", path.to_str().unwrap(), "meet", "--x", "0.5,1,0", "--y", "0.5,0,1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meet: Vec<f64> = serde_json::from_value(json(&out)["meet"].clone()).unwrap();
    assert!(meet.iter().all(|x| x.abs() <= 1e-9), "{meet:?}");
}

#[test]
fn contraction_is_globally_certified() {
    let (_d, dir) = setup();
    let out = monodyn(&["map", write(&dir, "m.json", CONTRACTION).to_str().unwrap(), "global"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["certified"], Value::Bool(true));
}

#[test]
fn simulate_writes_csv() {
    let (_d, dir) = setup();
    let path = write(&dir, "m.json", CONTRACTION);
    let out_dir = dir.join("out");
    let out = monodyn(&["--out", out_dir.to_str().unwrap(), "map", path.to_str().unwrap(), "simulate", "--start", "-3,4"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["status"], Value::from("converged"));
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn exit_codes() {
    let (_d, dir) = setup();
    let bad = write(&dir, "bad.json", r#"{"n":2,"entries":[[1,1]],"extra":1}"#);
    assert_eq!(monodyn(&["matrix", bad.to_str().unwrap(), "stable"]).status.code(), Some(2));
    let negative = write(&dir, "neg.json", r#"{"n":1,"entries":[[-1]]}"#);
    assert_eq!(monodyn(&["matrix", negative.to_str().unwrap(), "stable"]).status.code(), Some(2));
    let missing = dir.join("missing.json");
    assert_eq!(monodyn(&["matrix", missing.to_str().unwrap(), "stable"]).status.code(), Some(2));
    let jordan = write(&dir, "j.json", JORDAN);
    assert_eq!(monodyn(&["matrix", jordan.to_str().unwrap(), "normal-form"]).status.code(), Some(3));
    let doubling = write(&dir, "d.json", DOUBLING);
    let capped = monodyn(&["map", doubling.to_str().unwrap(), "simulate", "--start", "1", "--k", "5"]);
    assert_eq!(capped.status.code(), Some(4));
    assert_eq!(json(&capped)["status"], Value::from("capped"));
}

#[test]
fn output_is_deterministic() {
    let (_d, dir) = setup();
    let path = write(&dir, "m.json", CONTRACTION);
    let run = || monodyn(&["--seed", "7", "map", path.to_str().unwrap(), "global"]).stdout;
    assert_eq!(run(), run());
}

#[test]
fn floats_print_with_seventeen_digits() {
    let (_d, dir) = setup();
    let out = monodyn(&["matrix", write(&dir, "p.json", PROJECTION).to_str().unwrap(), "stable"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("1.0000000000000000e0"), "{text}");
}

#[test]
fn suite_passes_and_writes_summary() {
    let (_d, dir) = setup();
    let out_dir = dir.join("suite");
    let out = monodyn(&["--seed", "1", "--out", out_dir.to_str().unwrap(), "suite", "thm81", "--count", "100"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}{}", String::from_utf8_lossy(&out.stderr));
    assert!(text.contains("100 passed, 0 failed"), "{text}");
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("suite-thm81.json")).unwrap()).unwrap();
    assert_eq!(summary["failed"], Value::from(0));
}

#[test]
fn unknown_suite_is_an_input_error() {
    assert_eq!(monodyn(&["suite", "nope"]).status.code(), Some(2));
}
