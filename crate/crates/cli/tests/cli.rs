use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sepshare"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

fn cost(v: &Value, key: &str) -> (i64, i64) {
    let s = v[key].as_str().unwrap();
    let (n, d) = s.split_once('/').unwrap();
    (n.parse().unwrap(), d.parse().unwrap())
}

fn le(a: (i64, i64), b: (i64, i64)) -> bool {
    a.0 * b.1 <= b.0 * a.1
}

#[test]
fn fixture_optimum_is_reported_unenforceable() {
    let fx = run(&["fixture", "counterexample"], "");
    assert!(fx.status.success());
    let out = run(&["verify", "--profile", "opt"], &stdout(&fx));
    assert_eq!(out.status.code(), Some(1));
    let r = json(&out);
    assert_eq!(r["enforceable"], false);
    assert_eq!(r["input_cost"], "346/1");
}

/// Runs a transform, then re-verifies the emitted profile and protocol.
fn transform_and_reverify(instance: &str, args: &[&str], dir: &Path) -> Value {
    let prof = dir.join("profile.json");
    let prot = dir.join("protocol.json");
    let mut full = args.to_vec();
    full.extend(["--emit-profile", prof.to_str().unwrap(), "--emit-protocol", prot.to_str().unwrap()]);
    let out = run(&full, instance);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&out);
    assert!(le(cost(&r, "output_cost"), cost(&r, "input_cost")));
    let check =
        run(&["verify", "--profile-file", prof.to_str().unwrap(), "--protocol", prot.to_str().unwrap()], instance);
    let c = json(&check);
    for key in ["enforceable", "pne_verified", "budget_balanced"] {
        assert_eq!(c[key], r[key], "{key}");
        assert_eq!(c[key], true, "{key}");
    }
    assert_eq!(c["input_cost"], r["output_cost"]);
    r
}

#[test]
fn generated_instances_round_trip_through_every_transform() {
    let dir = tempfile::tempdir().unwrap();
    let ufl = stdout(&run(&["gen", "ufl", "--players", "2", "--facilities", "2", "--seed", "7"], ""));
    let r = transform_and_reverify(&ufl, &["transform-matroid"], dir.path());
    assert_eq!(r["pne_verified"], true);
    for seed in ["1", "2", "3"] {
        let m = stdout(&run(&["gen", "matroid", "--subadditive", "--seed", seed], ""));
        transform_and_reverify(&m, &["transform-matroid"], dir.path());
        let tree = stdout(&run(&["gen", "tree", "--seed", seed], ""));
        transform_and_reverify(&tree, &["transform-tree"], dir.path());
        let sp = stdout(&run(&["gen", "sp", "--seed", seed], ""));
        transform_and_reverify(&sp, &["nsepa", "transform"], dir.path());
    }
}

#[test]
fn empty_tree_instance_costs_nothing() {
    let inst = r#"{"players": 0, "spaces": [], "graph": {"directed": false, "edges": [[0, 1, "2"]]}}"#;
    let out = run(&["transform-tree"], inst);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["input_cost"], "0/1");
    assert_eq!(r["output_cost"], "0/1");
}

#[test]
fn malformed_json_exits_2_with_position() {
    let out = run(&["verify"], "{\"players\": 1,\n \"spaces\": [}");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2 column"), "{err}");
}

#[test]
fn budget_exhaustion_exits_3() {
    let fx = stdout(&run(&["fixture", "counterexample"], ""));
    let out = run(&["optimum", "--max-profiles", "5"], &fx);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn reports_are_reproducible() {
    let sp = stdout(&run(&["gen", "sp", "--seed", "11"], ""));
    assert_eq!(sp, stdout(&run(&["gen", "sp", "--seed", "11"], "")));
    let a = run(&["nsepa", "transform"], &sp);
    let b = run(&["nsepa", "transform"], &sp);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn trace_is_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let tree = stdout(&run(&["gen", "tree", "--seed", "5"], ""));
    let out = run(&["transform-tree", "--trace", trace.to_str().unwrap()], &tree);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["step"].is_string());
    }
}

#[test]
fn approx_display_keeps_exact_values() {
    let fx = stdout(&run(&["fixture", "counterexample"], ""));
    let r = json(&run(&["verify", "--profile", "opt", "--approx-display"], &fx));
    assert_eq!(r["input_cost"], "346/1");
    assert_eq!(r["approx"]["input_cost"], "346.000000");
}

#[test]
fn oracle_lists_strategies() {
    let fx = stdout(&run(&["fixture", "counterexample"], ""));
    let r = json(&run(&["oracle", "strategies", "--player", "1"], &fx));
    assert_eq!(r["count"].as_u64().unwrap() as usize, r["strategies"].as_array().unwrap().len());
    let r = json(&run(&["oracle", "enforceable", "--profile", "opt"], &fx));
    assert_eq!(r["enforceable"], false);
    assert_eq!(r["exhaustive_lp"], false);
}

#[test]
fn nsepa_check_emits_a_verified_protocol() {
    let sp = stdout(&run(&["gen", "sp", "--seed", "4"], ""));
    let t = json(&run(&["nsepa", "transform"], &sp));
    let profile = serde_json::to_string(&t["profile"]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.json");
    std::fs::write(&p, profile).unwrap();
    let out = run(&["nsepa", "check", "--profile-file", p.to_str().unwrap()], &sp);
    assert!(out.status.success());
    let r = json(&out);
    assert_eq!(r["enforceable"], true);
    assert_eq!(r["pne_verified"], true);
    assert_eq!(r["lp_value"], r["required"]);
}
