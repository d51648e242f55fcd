use std::process::{Command, Output};

use polycomp::polysym::Symbol;
use serde_json::Value;

fn polycomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polycomp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn averaging_is_bounded_case_b() {
    let out = polycomp(&["classify", "--example", "averaging3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let b = &v["boundedness"];
    assert_eq!(b["verdict"], "Bounded");
    assert_eq!(b["schema_version"], "1.0");
    let c = &b["contacts"][0];
    assert_eq!(c["case"], "b");
    assert_eq!(c["s"], 3);
    assert!(v.get("compactness").is_none());
}

#[test]
fn ex73_sign_pattern() {
    for (params, verdict) in [("0.01,0.01,0.01", "Bounded"), ("0.01,-0.01,0", "Unbounded"), ("0.01,0,0", "Unbounded")] {
        let out = polycomp(&["classify", "--example", "ex73", "--params", params]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(json(&out)["boundedness"]["verdict"], verdict, "{params}");
    }
}

#[test]
fn compactness_flag_adds_report() {
    let out = polycomp(&["classify", "--example", "compact2-monomial", "--compactness"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["compactness"]["verdict"], "NotCompact");
    let kinds: Vec<&str> = v["compactness"]["triggers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["kind"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"monomial-component"), "{kinds:?}");
}

#[test]
fn contacts_lists_records() {
    let out = polycomp(&["contacts", "--example", "identity"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let list = v.as_array().unwrap();
    assert!(!list.is_empty());
    assert_eq!(list[0]["I"].as_array().unwrap().len(), 3);
}

#[test]
fn verify_writes_csv_and_is_reproducible() {
    let dir = std::env::temp_dir().join(format!("polycomp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("fit.csv");
    let args = [
        "verify",
        "--example",
        "triple-monomial",
        "--constrained",
        "1,2",
        "--deltas",
        "1e-3:1e-1:5",
        "--samples",
        "200000",
        "--seed",
        "42",
        "--csv",
        csv.to_str().unwrap(),
    ];
    let a = polycomp(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let v = json(&a);
    let slope = v["slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.15, "{slope}");
    assert_eq!(v["hint"], "blow-up");
    assert_eq!(v["constrained"], serde_json::json!([1, 2]));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("delta,measure,stderr,samples,budget,ratio\n"));
    assert_eq!(text.lines().count(), 6);

    let b = polycomp(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(text, std::fs::read_to_string(&csv).unwrap());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn calibrate_reports_every_row() {
    let out = polycomp(&["calibrate", "--set", "annulus", "--deltas", "1e-2", "--samples", "100000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = json(&out);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["set"] == "annulus" && r["consistent"] == true));
    assert_eq!(rows[1]["estimate"]["mean"], 0.0);
}

#[test]
fn example_round_trips() {
    let out = polycomp(&["example", "ex71", "--params", "-0.01"]);
    assert_eq!(out.status.code(), Some(0));
    let s = Symbol::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(s.dim(), 3);
}

#[test]
fn exit_codes() {
    assert_eq!(polycomp(&["classify", "--example", "nope"]).status.code(), Some(2));
    assert_eq!(polycomp(&["example", "ex71", "--params", "0.5"]).status.code(), Some(2));
    assert_eq!(polycomp(&["classify"]).status.code(), Some(2));
    assert_eq!(polycomp(&["classify", "--example", "identity", "--tol-sig", "-1"]).status.code(), Some(2));
    assert_eq!(
        polycomp(&["verify", "--example", "identity", "--constrained", "4"]).status.code(),
        Some(2)
    );

    let dir = std::env::temp_dir().join(format!("polycomp-cli-sym-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let big = dir.join("big.json");
    std::fs::write(&big, r#"{"dimension":2,"components":[{"expr":"z1+z2"},{"expr":"0"}]}"#).unwrap();
    let out = polycomp(&["classify", "--input", big.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());
    let broken = dir.join("broken.json");
    std::fs::write(&broken, r#"{"dimension":2,"components":[{"expr":"z1+"},{"expr":"0"}]}"#).unwrap();
    assert_eq!(polycomp(&["classify", "--input", broken.to_str().unwrap()]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}
