use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reluscape"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("report on stdout")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_blind_minimum() {
    let o = run(&["analyze", "--data", s(&fixture("three_minima.csv")), "--params", s(&fixture("three_minima_b.json"))]);
    let r = stdout_json(&o);
    let res = &r["results"];
    assert!((res["loss"].as_f64().unwrap() - 0.3).abs() < 1e-12);
    assert_eq!(res["criticality"]["critical"], true);
    let kind = res["classification"]["kind"].as_str().unwrap();
    assert!(kind == "FlatTypeI" || kind == "SharpTypeII", "{kind}");
    let v = r["verdicts"].as_array().unwrap();
    assert!(v.iter().any(|v| v["name"] == "relu_blind_side" && v["passed"] == true));
    assert_eq!(r["digest"].as_str().unwrap().len(), 64);
}

#[test]
fn zero_network_is_not_a_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    fs::write(&data, "x1,label\n1.0,1\n2.0,1\n-1.0,-1\n").unwrap();
    let params = dir.path().join("p.json");
    fs::write(
        &params,
        r#"{"shape":{"dims":[1,2,1],"alpha":0.25},"weights":[[[0.0],[0.0]]],"biases":[[0.0,0.0]],"head":[[0.0,0.0]],"head_bias":[0.0]}"#,
    )
    .unwrap();
    let r = stdout_json(&run(&["analyze", "--data", s(&data), "--params", s(&params)]));
    assert_eq!(r["results"]["loss"], 1.0);
    assert_eq!(r["results"]["classification"]["kind"], "NotMinimum");
    assert_eq!(r["results"]["cell_hash"], Value::Null);
}

#[test]
fn malformed_csv_reports_the_line() {
    let o = run(&["analyze", "--data", s(&fixture("malformed.csv")), "--params", s(&fixture("three_minima_b.json"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("x2"), "{err}");
}

#[test]
fn shape_mismatch_is_an_input_error() {
    let o = run(&["analyze", "--data", s(&fixture("clusters.csv")), "--params", s(&fixture("three_minima_b.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gencheck_oracles() {
    let r = stdout_json(&run(&["gencheck", "--data", s(&fixture("duplicate_pair.csv")), "--alpha", "0.5", "--depth", "1"]));
    let g = &r["results"]["genericity"];
    assert_eq!(g["verdict"], "Rare");
    assert_eq!(g["witness"]["verified"], true);

    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("one.csv");
    fs::write(&single, "x1,x2,label\n0.3,0.4,1\n").unwrap();
    let r = stdout_json(&run(&["gencheck", "--data", s(&single), "--alpha", "0.5", "--depth", "1"]));
    assert_eq!(r["results"]["genericity"]["verdict"], "Generic");

    let big = dir.path().join("big.csv");
    let mut text = String::from("x1,label\n");
    for i in 0..16 {
        text.push_str(&format!("{},{}\n", i as f64 * 0.1, if i % 2 == 0 { 1 } else { -1 }));
    }
    fs::write(&big, text).unwrap();
    let o = run(&["gencheck", "--data", s(&big), "--alpha", "0.5", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

fn toy(dir: &Path) -> (PathBuf, PathBuf) {
    let data = dir.join("toy.csv");
    fs::write(&data, "x1,label\n1.0,1\n").unwrap();
    let params = dir.join("toy.json");
    fs::write(
        &params,
        r#"{"shape":{"dims":[1,1,1],"alpha":0.0,"output_bias":false},"weights":[[[0.0]]],"biases":[[0.5]],"head":[[0.0]]}"#,
    )
    .unwrap();
    (data, params)
}

#[test]
fn scan_grid_shows_cells_and_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let (data, params) = toy(dir.path());
    let out = dir.path().join("scan");
    let args = ["scan", "--data", s(&data), "--params", s(&params), "--axes", "W1[0,0]", "V[0,0]", "--grid", "21", "--range=-1,1", "--out", s(&out)];
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("scan.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t1,t2,loss,cell_hash,zero_count");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    assert_eq!(rows.len(), 441);
    let cells: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[3].as_str()).filter(|h| *h != "N").collect();
    assert!(cells.len() >= 2);
    assert!(cells.iter().all(|h| h.len() == 16));
    assert!(rows.iter().any(|r| r[4] != "0" && r[3] == "N"));
    // w = −0.5 kills the neuron: the loss is 1 regardless of v.
    for r in rows.iter().filter(|r| r[0] == "-1") {
        assert_eq!(r[2], "1");
    }
    let again = dir.path().join("again");
    let mut args2 = args;
    args2[12] = s(&again);
    assert!(run(&args2).status.success());
    assert_eq!(fs::read(out.join("scan.csv")).unwrap(), fs::read(again.join("scan.csv")).unwrap());
    let v = run(&["verify", "--report", s(&out.join("report.json"))]);
    assert!(v.status.success());
}

#[test]
fn scan_rejects_unknown_axis() {
    let dir = tempfile::tempdir().unwrap();
    let (data, params) = toy(dir.path());
    let o = run(&["scan", "--data", s(&data), "--params", s(&params), "--axes", "W9[0,0]", "V[0,0]", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_binary_archives_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let data = fixture("three_minima.csv");
    let cfg = fixture("train_binary.json");
    for out in [&a, &b] {
        let o = run(&["train", "--data", s(&data), "--config", s(&cfg), "--strict", "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ra = read_json(&a.join("report.json"));
    let rb = read_json(&b.join("report.json"));
    assert_eq!(ra["digest"], rb["digest"]);
    assert!(ra["results"]["best"]["loss"].as_f64().unwrap() <= 1e-4);
    assert_eq!(ra["results"]["runs"].as_array().unwrap().len(), 4);

    // Archives reload to the same values and re-serialize identically.
    let text = fs::read_to_string(a.join("best_params.json")).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);
    assert_eq!(text, fs::read_to_string(a.join("params/run_000.json")).unwrap());

    let o = run(&["verify", "--report", s(&a.join("report.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));

    // A tampered archive no longer reproduces the report.
    let mut v: Value = serde_json::from_str(&fs::read_to_string(a.join("params/run_001.json")).unwrap()).unwrap();
    v["head"][0][0] = Value::from(v["head"][0][0].as_f64().unwrap() + 0.5);
    fs::write(a.join("params/run_001.json"), serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(&["verify", "--report", s(&a.join("report.json"))]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn train_overrides_and_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = fixture("three_minima.csv");
    let cfg = fixture("train_binary.json");
    let o = run(&["train", "--data", s(&data), "--config", s(&cfg), "--set", "starts=2", "--set", "max_iters=500", "--seed", "9", "--out", s(dir.path())]);
    assert!(o.status.success());
    let r = read_json(&dir.path().join("report.json"));
    assert_eq!(r["results"]["runs"].as_array().unwrap().len(), 2);
    assert_eq!(r["metadata"]["seed"], 9);
    let o = run(&["train", "--data", s(&data), "--config", s(&cfg), "--set", "bogus=1", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["train", "--data", s(&fixture("clusters.csv")), "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_penalty_reports_replica_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "train", "--data", s(&fixture("clusters.csv")), "--config", s(&fixture("train_penalty.json")),
        "--set", "starts=2", "--out", s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("report.json"));
    assert!(r["results"]["max_replica_deviation"].as_f64().is_some());
    let names: Vec<&str> = r["verdicts"].as_array().unwrap().iter().map(|v| v["name"].as_str().unwrap()).collect();
    assert!(names.iter().any(|n| n.ends_with("penalty_exactness")));
    let best = dir.path().join("best_params.json");
    let a = stdout_json(&run(&["analyze", "--data", s(&fixture("clusters.csv")), "--params", s(&best)]));
    assert_eq!(a["results"]["model"], "replicated");
}
