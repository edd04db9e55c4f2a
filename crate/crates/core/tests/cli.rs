use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const AFFINE: &str = r#"{"shape":[1],"operators":[
    {"kind":"affine","matrix":[[1.0]],"offset":[-3.0]},
    {"kind":"affine","matrix":[[1.0]]},
    {"kind":"affine","matrix":[[2.0]]}]}"#;

const SMALL_EXPERIMENT: &str = r#"{
    "p": 12, "K": 3, "n": 30,
    "seeds": [1, 2],
    "orderings": ["1-2-3-4", "1-4-3-2"],
    "weight_grid_step": "1/3",
    "max_iter": 5000
}"#;

fn drsplit(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drsplit")).current_dir(cwd).args(args).output().expect("spawn drsplit")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn entries(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn plan_two_operators() {
    let tmp = tempfile::tempdir().unwrap();
    let o = drsplit(tmp.path(), &["plan", "--sigmas", "-1,2", "--weights", "1", "--mu", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!((v["lambda_bar_star"].as_f64().unwrap() - 0.25).abs() < 1e-9);
    assert_eq!(v["case"], "NonmonotoneA");
}

#[test]
fn plan_monotone_is_infinite() {
    let tmp = tempfile::tempdir().unwrap();
    let o = drsplit(tmp.path(), &["plan", "--sigmas", "0,0,0", "--weights", "0.5,0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["lambda_bar_star"], "inf");
}

#[test]
fn plan_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = drsplit(tmp.path(), &["plan", "--sigmas", "-1,0.5", "--weights", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stdout_json(&o)["case"], "Unsupported");
    assert_eq!(drsplit(tmp.path(), &["plan", "--sigmas", "-1,abc", "--weights", "1"]).status.code(), Some(1));
    assert_eq!(
        drsplit(tmp.path(), &["plan", "--sigmas", "-1,2", "--weights", "1", "--mu", "2.5"]).status.code(),
        Some(1)
    );
    assert_eq!(drsplit(tmp.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(drsplit(tmp.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn plan_reports_smooth_bounds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = drsplit(tmp.path(), &["plan", "--sigmas", "-0.5,-0.25,2", "--weights", "0.5,0.5", "--lipschitz", "2,1"]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    assert!(v["smooth_gamma_bar"].is_array());
    assert!(v["smooth_lambda_max"].as_f64().unwrap() > 0.0);
}

#[test]
fn solve_affine_writes_only_inside_out() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("affine.json"), AFFINE).unwrap();
    let o = drsplit(tmp.path(), &["solve", "--problem", "affine.json", "--tol", "1e-16", "--out", "run"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["converged"], true);
    assert_eq!(v["lambda_source"], "monotone_default");
    assert!((v["shadow"]["data"][0].as_f64().unwrap() - 0.75).abs() < 1e-6);
    assert_eq!(entries(tmp.path()), ["affine.json", "run"]);
    assert_eq!(entries(&tmp.path().join("run")), ["iterates.csv", "result.json"]);
    let on_disk: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("run/result.json")).unwrap()).unwrap();
    assert_eq!(on_disk, v);
}

#[test]
fn solve_gf_agrees_with_fg() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("affine.json"), AFFINE).unwrap();
    let o =
        drsplit(tmp.path(), &["solve", "--problem", "affine.json", "--variant", "gf", "--tol", "1e-16", "--out", "gf"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((stdout_json(&o)["shadow"]["data"][0].as_f64().unwrap() - 0.75).abs() < 1e-6);
}

#[test]
fn solve_max_iter_exits_3_with_log() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("affine.json"), AFFINE).unwrap();
    let o = drsplit(tmp.path(), &["solve", "--problem", "affine.json", "--max-iter", "1", "--tol", "0", "--out", "r"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout_json(&o)["converged"], false);
    let log = fs::read_to_string(tmp.path().join("r/iterates.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
}

#[test]
fn solve_missing_problem_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = drsplit(tmp.path(), &["solve", "--problem", "nowhere.json", "--out", "r"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere.json"));
    assert!(entries(tmp.path()).is_empty());
}

#[test]
fn solve_unsupported_needs_lambda() {
    let tmp = tempfile::tempdir().unwrap();
    let problem = r#"{"shape":[1],"operators":[
        {"kind":"affine","matrix":[[-1.0]],"sigma":-1.0},
        {"kind":"affine","matrix":[[0.5]],"sigma":0.5}]}"#;
    fs::write(tmp.path().join("p.json"), problem).unwrap();
    let o = drsplit(tmp.path(), &["solve", "--problem", "p.json", "--out", "r"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn experiment_is_deterministic_across_threads() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), SMALL_EXPERIMENT).unwrap();
    let a = drsplit(tmp.path(), &["experiment", "--config", "cfg.json", "--out", "a"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = drsplit(tmp.path(), &["experiment", "--config", "cfg.json", "--out", "b", "--parallel", "4"]);
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(entries(tmp.path()), ["a", "b", "cfg.json"]);
    let files = entries(&tmp.path().join("a"));
    assert!(files.contains(&"sweep.csv".to_string()));
    assert!(files.contains(&"summary.csv".to_string()));
    assert!(files.iter().any(|f| f.ends_with(".svg")));
    assert_eq!(files, entries(&tmp.path().join("b")));
    for f in &files {
        let x = fs::read(tmp.path().join("a").join(f)).unwrap();
        let y = fs::read(tmp.path().join("b").join(f)).unwrap();
        assert!(x == y, "{f} differs between --parallel 1 and 4");
    }
    let v = stdout_json(&a);
    assert_eq!(v["runs"], 4);
}

#[test]
fn experiment_rejects_bad_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"p": 2, "K": 3, "n": 10, "seeds": [1]}"#).unwrap();
    let o = drsplit(tmp.path(), &["experiment", "--config", "cfg.json", "--out", "a"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_suites() {
    let tmp = tempfile::tempdir().unwrap();
    for suite in ["identities", "planner"] {
        let o = drsplit(tmp.path(), &["verify", "--suite", suite, "--seed", "7"]);
        assert_eq!(o.status.code(), Some(0), "{suite}: {}", String::from_utf8_lossy(&o.stderr));
        let v = stdout_json(&o);
        assert_eq!(v["passed"], true);
        assert!(!v["suites"].as_array().unwrap().is_empty());
    }
    assert_eq!(drsplit(tmp.path(), &["verify", "--suite", "nope"]).status.code(), Some(1));
    assert!(entries(tmp.path()).is_empty());
}
