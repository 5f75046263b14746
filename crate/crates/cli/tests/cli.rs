use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kneadlab"));
    cmd.args(args);
    if let Some(t) = threads {
        cmd.env("KNEADLAB_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn trans_period_three_is_positive() {
    let out = run(&["trans", "--family", "quad", "--period", "3"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["verdict"], true);
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 1);
    assert!(recs[0]["trans_sum"].as_f64().unwrap() > 0.0);
    assert_eq!(v["config"]["tol"], 1e-9);
}

#[test]
fn odd_constants_have_positive_margins() {
    let out = run(&["constants", "--odd-ell", "3..31"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let recs = v["records"].as_array().unwrap();
    assert_eq!(recs.len(), 15);
    assert!(recs.iter().all(|r| r["margin"].as_f64().unwrap() > 0.0));
}

#[test]
fn quadratic_scan_never_decreases() {
    let out = run(&["scan", "--family", "quad", "--from=-2", "--to", "0.25", "--steps", "401"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["summary"]["decreases"], 0);
    assert_eq!(v["records"].as_array().unwrap().len(), 401);
}

#[test]
fn empty_plotdata_succeeds() {
    let out = run(&["knead", "--family", "quad", "--param=-1", "--format", "plotdata"], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn csv_has_header_and_rows() {
    let out = run(&["knead", "--family", "quad", "--param=-1,-2", "--steps", "4", "--format", "csv"], None);
    assert_eq!(out.status.code(), Some(0));
    let s = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = s.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows, ["param,word", "-1.0,-0", "-2.0,-+++"]);
}

#[test]
fn output_does_not_depend_on_thread_count() {
    let args = ["spectrum", "--family", "quad", "--period", "5", "--steps", "4096"];
    let one = run(&args, Some("1"));
    let four = run(&args, Some("4"));
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);

    let args = ["lift", "--family", "quad", "--param=-1.7548776662466927", "--seed", "3", "--iterations", "8"];
    assert_eq!(run(&args, Some("1")).stdout, run(&args, Some("4")).stdout);
}

#[test]
fn unknown_family_is_an_error() {
    let out = run(&["knead", "--family", "nope", "--param", "1"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown family"));
}

#[test]
fn separation_failure_exits_two() {
    let out = run(&["separation", "--family", "flat", "--param=-0.9"], None);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["verdict"], false);
    let ok = run(&["separation", "--family", "flat", "--param=-0.5"], None);
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn pl_golden_tent_is_markov() {
    let out = run(&["pl", "--kappa", "1,1", "--values", "0.6180339887498949"], None);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["summary"]["s"].as_f64().unwrap() - 1.618033988749895).abs() < 1e-12);
    assert_eq!(v["summary"]["ergodic"], true);
}

#[test]
fn sectors_on_power_law_word() {
    let out = run(&["sectors", "--family", "powerlaw", "--word=-++0", "--seed", "10"], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["records"].as_array().unwrap().len(), 5);
}
