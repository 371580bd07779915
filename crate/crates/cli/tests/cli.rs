// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_trojanbmc"));
    c.env_remove("TROJANBMC_BUDGET");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn parse_reports_structure() {
    let o = run(&["parse", "builtin:s349s"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("inputs 9\n"));
    assert!(s.contains("outputs 11\n"));
    assert!(s.contains("flip-flops 15\n"));
}

#[test]
fn parse_not_only_histogram() {
    let d = tempfile::tempdir().unwrap();
    let f = d.path().join("inv.bench");
    fs::write(&f, "INPUT(a)\nOUTPUT(y)\ny = NOT(a)\n").unwrap();
    let o = run(&["parse", "--json", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["histogram"], serde_json::json!({"NOT": 1}));
}

#[test]
fn parse_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let bad = d.path().join("bad.bench");
    fs::write(&bad, "INPUT(a)\nOUTPUT(y)\ny = NOT(a\n").unwrap();
    let o = run(&["parse", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let undriven = d.path().join("u.bench");
    fs::write(&undriven, "INPUT(a)\nOUTPUT(y)\ny = NAND(a, b)\n").unwrap();
    assert_eq!(run(&["parse", undriven.to_str().unwrap()]).status.code(), Some(2));

    let missing = d.path().join("none.bench");
    assert_eq!(run(&["parse", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["parse"]).status.code(), Some(1));
}

#[test]
fn coverage_table() {
    let o = run(&["coverage", "--inputs", "9", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"][0]["patterns"], "512");
    assert_eq!(v["rows"][0]["seconds"], "51.2");
    let o = run(&["coverage", "--inputs", "0"]);
    assert!(stdout(&o).contains("0.1"));
    assert_eq!(run(&["coverage", "--inputs", "3", "--rate", "0"]).status.code(), Some(1));
}

fn analyze(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["analyze", "--netlist", "builtin:s27", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn analyze_writes_reports() {
    let d = tempfile::tempdir().unwrap();
    let o = analyze(d.path(), &["--emit-smv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["report.json", "report.txt", "summary.csv", "run.json", "model.smv"] {
        assert!(d.path().join(f).is_file(), "{f}");
    }
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r["seed"], 1);
    assert_eq!(r["tool"]["name"], "trojanbmc");
    assert_eq!(r["config_sha256"].as_str().unwrap().len(), 64);
    assert!(r["runs"]
        .as_array()
        .unwrap()
        .iter()
        .all(|run| run["counterexamples"].as_array().unwrap().is_empty()));
}

#[test]
fn analyze_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    analyze(a.path(), &["--seed", "7"]);
    analyze(b.path(), &["--seed", "7"]);
    for f in ["report.json", "report.txt", "summary.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn analyze_implicates_intruded_net() {
    let d = tempfile::tempdir().unwrap();
    let spec = d.path().join("intrude.txt");
    fs::write(&spec, "net:G15 parallel 8\n").unwrap();
    let o = analyze(d.path(), &["--intrude", spec.to_str().unwrap(), "--metrics", "dp"]);
    assert_eq!(o.status.code(), Some(0));
    let r: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(r["vulnerable"][0]["name"], "G15");
}

#[test]
fn analyze_budget_and_input_errors() {
    let d = tempfile::tempdir().unwrap();
    let o = bin()
        .env("TROJANBMC_BUDGET", "10")
        .args(["analyze", "--netlist", "builtin:s27", "--out"])
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let csv = fs::read_to_string(d.path().join("summary.csv")).unwrap();
    assert!(csv.contains("UNKNOWN_BUDGET"));
    assert!(!csv.contains("HOLDS"));

    assert_eq!(analyze(d.path(), &["--bound", "0"]).status.code(), Some(1));
    assert_eq!(analyze(d.path(), &["--policy", "sometimes"]).status.code(), Some(1));
    assert_eq!(analyze(d.path(), &["--metrics", "dp,noise"]).status.code(), Some(1));
    let spec = d.path().join("bad.txt");
    fs::write(&spec, "net:nope parallel 2\n").unwrap();
    assert_eq!(
        analyze(d.path(), &["--intrude", spec.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn random_policy_runs() {
    let d = tempfile::tempdir().unwrap();
    let o = analyze(d.path(), &["--policy", "random:20", "--bound", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("transitions per exploration 100"));
}

#[test]
fn sweep_writes_csv_and_thresholds() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "sweep",
        "--netlist",
        "builtin:s27",
        "--class",
        "NCP",
        "--sizes",
        "0..=3",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    let t: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("thresholds.json")).unwrap()).unwrap();
    assert_eq!(t.as_array().unwrap().len(), 3);
}

#[test]
fn defaults_round_trip_through_analyze() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["emit-defaults", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let tech = d.path().join("tech.txt");
    let var = d.path().join("variation.txt");
    let out_a = d.path().join("a");
    let out_b = d.path().join("b");
    analyze(&out_a, &[]);
    analyze(
        &out_b,
        &["--tech", tech.to_str().unwrap(), "--variation", var.to_str().unwrap()],
    );
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("report.json")).unwrap()).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_b.join("report.json")).unwrap()).unwrap();
    assert_eq!(a["config_sha256"], b["config_sha256"]);
    assert_eq!(a["envelope"], b["envelope"]);
}

#[test]
fn profile_csv_has_rows() {
    let o = run(&["profile", "--netlist", "builtin:s27"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("gate,net,kind,state,dp_w,lp_w,delay_s\n"));
    assert!(s.lines().count() > 13);
}
