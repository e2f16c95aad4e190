use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::io::Write;

use qcorr::{BellFunctional, Correlation, MaxEntRep};
use serde_json::Value;
use tempfile::TempDir;

fn qcorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qcorr")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn ok(args: &[&str]) -> Vec<u8> {
    let out = qcorr(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn save(dir: &TempDir, name: &str, bytes: &[u8]) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, bytes).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn chsh_reports_optimal_value() {
    let out = qcorr(&["chsh"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    let value = v["value"].as_f64().unwrap();
    assert!((value - (0.5 + 0.5f64.sqrt() / 2.0)).abs() < 1e-12);
    assert_eq!(v["classical_bound"].as_f64().unwrap(), 0.75);
    let p = Correlation::from_json_str(&v["correlation"].to_string(), 1e-12).unwrap();
    assert!(p.validate(1e-12).ok);
    let rep = MaxEntRep::from_json_str(&v["rep"].to_string()).unwrap();
    assert!(rep.eval().unwrap().sup_distance(&p).unwrap() < 1e-15);
}

#[test]
fn combine_matches_weighted_mean() {
    let dir = TempDir::new().unwrap();
    let a = save(&dir, "a.json", &ok(&["random", "rep", "--n-a", "2", "--n-b", "2", "--m", "2", "--d", "2", "--seed", "1"]));
    let b = save(&dir, "b.json", &ok(&["random", "rep", "--n-a", "2", "--n-b", "2", "--m", "2", "--d", "3", "--seed", "2"]));
    let c = save(&dir, "c.json", &ok(&["combine", s(&a), s(&b), "--weights", "1/3,2/3"]));
    let combined = MaxEntRep::from_json_str(&std::fs::read_to_string(&c).unwrap()).unwrap();
    assert_eq!(combined.d(), 18);

    let pc = save(&dir, "pc.json", &ok(&["eval", "max-ent", s(&c)]));
    let pa = Correlation::from_json_str(&String::from_utf8(ok(&["eval", "max-ent", s(&a)])).unwrap(), 1e-12).unwrap();
    let pb = Correlation::from_json_str(&String::from_utf8(ok(&["eval", "max-ent", s(&b)])).unwrap(), 1e-12).unwrap();
    let mean = Correlation::convex_combine(&[pa, pb], &[1.0 / 3.0, 2.0 / 3.0]).unwrap();
    let pm = save(&dir, "pm.json", mean.to_json_string().as_bytes());
    let d = stdout_json(&qcorr(&["distance", s(&pc), s(&pm)]));
    assert!(d["sup_distance"].as_f64().unwrap() < 1e-12);

    let plan = stdout_json(&qcorr(&["combine", s(&a), s(&b), "--weights", "1/3,2/3", "--plan"]));
    assert_eq!(plan["total_dim"].as_u64(), Some(18));
}

#[test]
fn lift_then_corner_round_trips_exactly() {
    let dir = TempDir::new().unwrap();
    let p = save(&dir, "p.json", &ok(&["random", "correlation", "--n-a", "2", "--n-b", "3", "--m", "2", "--seed", "9"]));
    let lifted = save(&dir, "l.json", &ok(&["lift", "nonsignalling", s(&p)]));
    let back = ok(&["corner", s(&lifted), "--n-a", "2", "--n-b", "3"]);
    let orig: Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
    let back: Value = serde_json::from_slice(&back).unwrap();
    assert_eq!(orig["values"], back["values"]);

    let out = qcorr(&["validate", "correlation", s(&lifted)]);
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["ok"], Value::Bool(true));
}

#[test]
fn identical_seeds_give_identical_bytes() {
    for args in [
        &["random", "rep", "--n-a", "2", "--n-b", "3", "--m", "3", "--d", "3", "--seed", "77"][..],
        &["random", "pvm", "--d", "4", "--ranks", "1,3", "--seed", "5"][..],
        &["random", "commuting-rep", "--n-a", "1", "--n-b", "2", "--m", "2", "--d", "3", "--seed", "4"][..],
    ] {
        assert_eq!(ok(args), ok(args));
    }
    let a = ok(&["random", "rep", "--n-a", "1", "--n-b", "1", "--m", "2", "--d", "2", "--seed", "1"]);
    let b = ok(&["random", "rep", "--n-a", "1", "--n-b", "1", "--m", "2", "--d", "2", "--seed", "2"]);
    assert_ne!(a, b);
}

#[test]
fn malformed_json_exits_two_with_position() {
    let dir = TempDir::new().unwrap();
    let bad = save(&dir, "bad.json", b"{\n  \"n_a\": 1,\n  \"n_b\": oops\n}");
    let out = qcorr(&["eval", "max-ent", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("line 3"), "{msg}");
    assert!(out.stdout.is_empty());
}

#[test]
fn usage_and_io_errors_exit_two() {
    assert_eq!(qcorr(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qcorr(&["corner", "x.json"]).status.code(), Some(2));
    assert_eq!(qcorr(&["eval", "state", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(qcorr(&["combine", "/nonexistent", "--weights", "1/0"]).status.code(), Some(2));
    assert_eq!(qcorr(&["--help"]).status.code(), Some(0));
}

#[test]
fn membership_exit_codes() {
    let dir = TempDir::new().unwrap();
    let chsh = stdout_json(&qcorr(&["chsh"]));
    let q = save(&dir, "q.json", chsh["correlation"].to_string().as_bytes());
    let out = qcorr(&["membership", s(&q)]);
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["status"], "outside");
    let cert = &v["certificate"];
    let f: BellFunctional = serde_json::from_value(cert["functional"].clone()).unwrap();
    let bound = f.classical_bound(1000).unwrap();
    assert!(cert["achieved_value"].as_f64().unwrap() > bound + 1e-9);

    let uniform = Correlation::new(2, 2, 2, vec![0.25; 16]).unwrap();
    let u = save(&dir, "u.json", uniform.to_json_string().as_bytes());
    let out = qcorr(&["membership", s(&u)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["inside"], Value::Bool(true));
}

#[test]
fn validate_flags_bad_inputs() {
    let dir = TempDir::new().unwrap();
    // normalized but signalling: Alice's marginal depends on y
    let mut values = vec![0.0; 16];
    for x in 0..2 {
        for y in 0..2 {
            values[((x * 2 + y) * 2 + y) * 2] = 1.0;
        }
    }
    let p = save(&dir, "p.json", Correlation::new(2, 2, 2, values).unwrap().to_json_string().as_bytes());
    let out = qcorr(&["marginals", s(&p)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["well_defined"], Value::Bool(false));

    let neg = save(&dir, "n.json", br#"{"n_a":1,"n_b":1,"m":2,"values":[1.5,-0.5,0,0]}"#);
    let out = qcorr(&["validate", "correlation", s(&neg)]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["ok"], Value::Bool(false));

    // a two-outcome family that is not complete
    let rep = save(&dir, "r.json", br#"{"d":1,"m":2,"alice":[[[[[0.5,0]]],[[[0.25,0]]]]],"bob":[[[[[1,0]]],[[[0,0]]]]]}"#);
    let out = qcorr(&["validate", "rep", s(&rep)]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn dilation_pipeline_preserves_correlation() {
    let dir = TempDir::new().unwrap();
    let rep = save(&dir, "c.json", &ok(&["random", "commuting-rep", "--n-a", "2", "--n-b", "1", "--m", "2", "--d", "2", "--max-den", "3", "--seed", "11"]));
    let before = stdout_json(&qcorr(&["eval", "povm", s(&rep)]));
    let dilated = save(&dir, "d.json", &ok(&["dilate", s(&rep)]));
    let pvm = MaxEntRep::from_json_str(&std::fs::read_to_string(&dilated).unwrap()).unwrap();
    pvm.validate().unwrap();
    let after = save(&dir, "after.json", &ok(&["eval", "max-ent", s(&dilated)]));
    let before = save(&dir, "before.json", before.to_string().as_bytes());
    let d = stdout_json(&qcorr(&["distance", s(&before), s(&after)]));
    assert!(d["sup_distance"].as_f64().unwrap() < 1e-9);

    let binary = save(&dir, "b.json", &ok(&["random", "binary-povm-rep", "--n-a", "1", "--n-b", "1", "--d", "2", "--seed", "3"]));
    assert_eq!(qcorr(&["dilate", s(&binary)]).status.code(), Some(1));
    let rounded = save(&dir, "rb.json", &ok(&["round-spectrum", s(&binary), "--eps", "1e-2", "--max-den", "1000"]));
    assert!(qcorr(&["dilate", s(&rounded), "--max-den", "1000", "--max-dim", "100000"]).status.success());
}

#[test]
fn approx_weights_and_bell_and_stdin() {
    let v = stdout_json(&qcorr(&["approx-weights", "0.2,0.3,0.5", "--eps", "1e-6"]));
    assert_eq!(v["denominator"].as_u64(), Some(10));
    assert!(v["max_error"].as_f64().unwrap() <= 1e-6);

    let dir = TempDir::new().unwrap();
    let chsh = stdout_json(&qcorr(&["chsh"]));
    let q = save(&dir, "q.json", chsh["correlation"].to_string().as_bytes());
    let a = stdout_json(&qcorr(&["bell", s(&q), "--chsh"]))["value"].as_f64().unwrap();
    assert!((a - chsh["value"].as_f64().unwrap()).abs() < 1e-15);

    let mut child = Command::new(env!("CARGO_BIN_EXE_qcorr"))
        .args(["corner", "-", "--n-a", "1", "--n-b", "1"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(chsh["correlation"].to_string().as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(stdout_json(&out)["n_a"], 1);

    let target = dir.path().join("out.json");
    assert!(qcorr(&["chsh", "--output", s(&target)]).stdout.is_empty());
    assert!(std::fs::read_to_string(&target).unwrap().ends_with("}\n"));
}
