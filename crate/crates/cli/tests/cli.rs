use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hetsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetsched")).args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = hetsched(args);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_solve_validate() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("fj.json");
    let out = hetsched(&["generate", "--family", "forkjoin", "--phases", "2", "--width", "10", "--seed", "3", "--out", s(&graph)]);
    assert!(out.status.success());
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fj.json.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["tasks"], 23);

    let csv = dir.path().join("s.csv");
    let report = ok_json(&["solve", "--algo", "hlp-ols", "--platform", "4,2", "--graph", s(&graph), "--out", s(&csv)]);
    let (mk, lp) = (report["makespan"].as_f64().unwrap(), report["lp_star"].as_f64().unwrap());
    assert!(mk >= lp && mk <= 6.0 * lp);
    let checked = ok_json(&["validate", "--graph", s(&graph), "--platform", "4,2", "--schedule", s(&csv)]);
    assert_eq!(checked["schedule"], "ok");
    assert_eq!(checked["makespan"].as_f64().unwrap(), mk);

    let doc = dir.path().join("s.json");
    let report = ok_json(&[
        "solve", "--algo", "random", "--seed", "9", "--arrival", "random:5", "--platform", "4,2", "--graph", s(&graph),
        "--out", s(&doc),
    ]);
    assert_eq!(report["seed"], 9);
    assert_eq!(report["arrival"], "random:5");
    assert_eq!(report["decisions"].as_array().unwrap().len(), 23);
    ok_json(&["validate", "--graph", s(&graph), "--platform", "4,2", "--schedule", s(&doc)]);
}

#[test]
fn bounds_with_exact_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("erls.json");
    assert!(hetsched(&["generate", "--family", "erls-adv", "--m", "4", "--k", "1", "--out", s(&graph)]).status.success());
    let b = ok_json(&["bounds", "--platform", "4,1", "--graph", s(&graph), "--opt"]);
    assert!((b["opt"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    assert!(b["lp_star"].as_f64().unwrap() <= 4.0 + 1e-9);
    let erls = ok_json(&["solve", "--algo", "erls", "--platform", "4,1", "--graph", s(&graph)]);
    assert_eq!(erls["makespan"].as_f64().unwrap(), 8.0);
}

#[test]
fn bench_then_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bench.toml");
    fs::write(
        &config,
        r#"
platforms = ["8,2"]
algorithms = ["hlp-est", "hlp-ols", "heft", "erls", "greedy"]

[[instances]]
family = "forkjoin"
phases = [2]
width = [10]
seeds = [0, 1]

[[instances]]
family = "hlp-adv"
m = 3
"#,
    )
    .unwrap();
    let results = dir.path().join("results.csv");
    let out = hetsched(&["bench", "--config", s(&config), "--out", s(&results)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&results).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "instance,family,params,seed,platform,algorithm,makespan,lp_star,cp_min,ratio,wall_ms,status");
    assert_eq!(lines.count(), 15);

    let out = hetsched(&["summarize", "--input", s(&results)]);
    assert!(out.status.success());
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("pairwise,forkjoin,hlp-ols,hlp-est,")));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    assert!(hetsched(&["generate", "--family", "forkjoin", "--width", "4", "--out", s(&graph)]).status.success());

    // malformed platform and truncated JSON are parse errors
    assert_eq!(hetsched(&["solve", "--algo", "heft", "--platform", "4,x", "--graph", s(&graph)]).status.code(), Some(2));
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"q\":2,\"tasks\":[").unwrap();
    assert_eq!(hetsched(&["validate", "--graph", s(&bad)]).status.code(), Some(2));
    assert_eq!(hetsched(&["validate", "--graph", s(&dir.path().join("missing.json"))]).status.code(), Some(2));

    // a platform with the wrong number of types is a validation error
    let out = hetsched(&["solve", "--algo", "heft", "--platform", "4,2,2", "--graph", s(&graph)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());

    // so is a schedule that breaks a precedence
    let sched = dir.path().join("s.csv");
    ok_json(&["solve", "--algo", "heft", "--platform", "2,1", "--graph", s(&graph), "--out", s(&sched)]);
    let text = fs::read_to_string(&sched).unwrap();
    let mut rows: Vec<&str> = text.lines().collect();
    let header = rows.remove(0);
    let shifted: Vec<String> = rows.iter().map(|r| shift_start(header, r)).collect();
    fs::write(&sched, format!("{header}\n{}\n", shifted.join("\n"))).unwrap();
    let out = hetsched(&["validate", "--graph", s(&graph), "--platform", "2,1", "--schedule", s(&sched)]);
    assert_eq!(out.status.code(), Some(1));

    // too many tasks for the exact optimum
    assert_eq!(hetsched(&["bounds", "--platform", "2,1", "--graph", s(&graph), "--opt"]).status.code(), Some(1));
}

/// Moves every task to start at time zero, keeping its duration.
fn shift_start(header: &str, row: &str) -> String {
    let cols: Vec<&str> = header.split(',').collect();
    let start = cols.iter().position(|c| *c == "start").unwrap();
    let finish = cols.iter().position(|c| *c == "finish").unwrap();
    let mut f: Vec<String> = row.split(',').map(String::from).collect();
    let dur = f[finish].parse::<f64>().unwrap() - f[start].parse::<f64>().unwrap();
    f[start] = "0".into();
    f[finish] = dur.to_string();
    f.join(",")
}
