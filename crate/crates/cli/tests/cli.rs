use std::process::Command;

use bottrig_cli::{run, EXIT_COUNTEREXAMPLE, EXIT_OK, EXIT_USAGE};
use serde_json::Value;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("bottrig").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let mut v = vec!["--format", "json"];
    v.extend_from_slice(args);
    let (code, out, err) = call(&v);
    assert_eq!(code, EXIT_OK, "{err}");
    serde_json::from_str(&out).unwrap()
}

const CP1: &str = r#"{"n":1,"coeffs":[]}"#;

fn bundle(c: i64, a: i64, y: i64) -> String {
    format!(r#"{{"base":{CP1},"c1":[{c}],"a":{a},"y":[{y}]}}"#)
}

#[test]
fn autos_lists_eight_matrices() {
    let v = json(&["autos", "1"]);
    let rows = v["automorphisms"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().any(|r| r["matrix"] == serde_json::json!([[1, 0], [-2, -1]])));
    assert_eq!(v["diffeo_type"], "OddType");
    let (code, out, _) = call(&["autos", "-4"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("Sigma_-4: even"));
}

#[test]
fn extend_reports_failed_condition() {
    let b = bundle(1, 2, 0);
    let (code, out, _) = call(&["extend", &b, "--matrix", "-1", "0", "0", "-1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "DoesNotExtend: requires y = -(a/2)c1(xi_{n+1})");

    let v = json(&["extend", &bundle(2, 2, -2), "--matrix", "-1", "0", "0", "-1"]);
    assert_eq!(v["outcome"], "extends");
    assert_eq!(v["u1"], serde_json::json!([2]));
}

#[test]
fn ring_mul_inline() {
    let input = r#"{"tower":{"n":2,"coeffs":[[2,1,3]]},"lhs":[[[2],1]],"rhs":[[[2],1]]}"#;
    let v = json(&["ring-mul", input]);
    assert_eq!(v["product"], serde_json::json!([[[1, 2], 3]]));
}

#[test]
fn classify_with_and_without_iso() {
    let d = bundle(1, 0, 1);
    let pair = format!(r#"{{"source":{d},"target":{d},"iso":{{"images":[[1,0,0],[0,0,1],[0,1,0]]}}}}"#);
    let v = json(&["classify", &pair]);
    assert_eq!(v["conclusion"], "IsomorphicOverBase");
    let (code, out, _) = call(&["classify", &pair, "--explain"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("FiberProductSwap") && out.contains("because"));

    // searched: Sigma_1 and Sigma_3 bundles with c1 = 2x1
    let pair = format!(r#"{{"source":{},"target":{}}}"#, bundle(2, 1, -1), bundle(2, 3, -3));
    assert_eq!(json(&["classify", &pair])["conclusion"], "IsomorphicOverBase");

    // different parity: nothing to certify
    let pair = format!(r#"{{"source":{},"target":{}}}"#, bundle(0, 0, 0), bundle(0, 1, 0));
    assert_eq!(json(&["classify", &pair])["conclusion"], "NotDecidedIsomorphic");
}

#[test]
fn classify_rejects_non_isomorphism() {
    let d = bundle(1, 0, 1);
    let pair = format!(r#"{{"source":{d},"target":{d},"iso":{{"images":[[1,0,0],[0,2,0],[0,0,1]]}}}}"#);
    let (code, _, err) = call(&["classify", &pair]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("precondition"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(call(&["autos", "x"]).0, EXIT_USAGE);
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["extend", "{not json", "--matrix", "1", "0", "0", "1"]).0, EXIT_USAGE);
    assert_eq!(call(&["extend", &bundle(0, 0, 0), "--matrix", "1", "0"]).0, EXIT_USAGE);
    assert_eq!(call(&["autos", "10000000"]).0, EXIT_USAGE);
    assert_eq!(call(&["verify-s4", "--coeff-bound", "2", "--matrix-bound", "3"]).0, EXIT_USAGE);
    assert_eq!(call(&["extend", "/nonexistent/bundle.json", "--matrix", "1", "0", "0", "1"]).0, EXIT_USAGE);
}

#[test]
fn sweeps_pass_and_formats_agree() {
    let args = ["verify-s4", "--base-height", "0", "--coeff-bound", "2", "--jobs", "1"];
    let v = json(&args);
    assert_eq!(v["instances_scanned"], 5);
    assert_eq!(v["counterexamples"], serde_json::json!([]));
    let (code, table, _) = call(&args);
    assert_eq!(code, EXIT_OK);
    for key in ["instances_scanned", "isos_found", "certificates_emitted", "parity_violations"] {
        let n = v[key].as_u64().unwrap();
        let label = key.replace('_', " ").replace("isos", "isomorphisms");
        let line = table.lines().find(|l| l.starts_with(&label)).unwrap_or_else(|| panic!("{label}"));
        assert!(line.ends_with(&format!(" {n}")), "{line}");
    }
}

#[test]
fn verify_main_over_cp1_exits_zero() {
    let exe = env!("CARGO_BIN_EXE_bottrig");
    let status = Command::new(exe)
        .args(["verify-main", "--base-height", "1", "--coeff-bound", "2"])
        .env("BOTTRIG_JOBS", "1")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&status.stdout));
    let _ = EXIT_COUNTEREXAMPLE;
}

#[test]
fn census_json() {
    let v = json(&["census", "--height", "2", "--coeff-bound", "2", "--matrix-bound", "4"]);
    assert_eq!(v["towers"], 5);
    assert_eq!(v["classes"].as_array().unwrap().len(), 2);
}
