use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const DEFAULTS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../defaults.json");

fn urllc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urllc")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn allocate_defaults_prints_json() {
    let o = urllc(&["allocate", "--scenario", DEFAULTS, "--receiver", "mrc"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "converged");
    assert_eq!(v["receiver"], "mrc");
    assert_eq!(v["rate_lb"].as_array().unwrap().len(), 10);
}

#[test]
fn zero_energy_is_infeasible_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("zero.json");
    let text = std::fs::read_to_string(DEFAULTS).unwrap().replace("\"energy\": 2.0", "\"energy\": 0.0");
    std::fs::write(&path, text).unwrap();
    let o = urllc(&["allocate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("infeasible: phi=0.0000 < 1"), "{}", stderr(&o));
    let o = urllc(&["mc-verify", "--scenario", path.to_str().unwrap(), "--trials", "10"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_and_io_errors_exit_two() {
    for args in [
        vec!["allocate", "--scenario", "/nonexistent/scenario.json"],
        vec!["allocate", "--bogus-flag"],
        vec!["allocate", "--receiver", "mmse"],
        vec!["allocate", "--algorithm", "greedy"],
        vec!["allocate", "--xi", "0"],
        vec!["sweep", "--axis", "power"],
        vec!["sweep", "--axis", "blocklength", "--values", "5"],
        vec!["mc-verify", "--trials", "0"],
        vec!["gp-solve", "/nonexistent.gp"],
        vec![],
    ] {
        let o = urllc(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(o.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn allocation_round_trips_through_mc_verify() {
    let dir = tempfile::tempdir().unwrap();
    let alloc = dir.path().join("alloc.json");
    let o = urllc(&["allocate", "--scenario", DEFAULTS, "--receiver", "zf", "--out", alloc.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&alloc).unwrap()).unwrap();
    let lb: Vec<f64> = v["rate_lb"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();

    let o = urllc(&[
        "mc-verify", "--scenario", DEFAULTS, "--allocation", alloc.to_str().unwrap(), "--trials", "2000",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let reported = csv_column(&out, "lb");
    assert_eq!(reported.len(), lb.len());
    for (a, b) in reported.iter().zip(&lb) {
        assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
    }
    for gap in csv_column(&out, "gap") {
        assert!(gap < 0.02, "gap {gap}");
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        let o = urllc(&["--threads", threads, "mc-verify", "--receiver", "zf", "--trials", "200", "--seed", "4"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        stdout(&o)
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn compare_and_sweep_emit_csv() {
    let o = urllc(&["compare", "--receiver", "mrc"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("algorithm,status,phi,weighted_sum,shannon_sum,violations\n"));
    assert_eq!(out.lines().count(), 5);

    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("summary.json");
    let o = urllc(&[
        "sweep", "--axis", "energy", "--values", "1,2", "--snapshots", "2", "--algorithms", "proposed,conventional",
        "--summary", summary.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("axis,value,algorithm,snapshot,weighted_sum,infeasible_count\n"));
    assert_eq!(out.lines().count(), 1 + 2 * 2 * 2);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(s.as_array().unwrap().len(), 4);
    assert!(s[0]["stderr_weighted_sum"].is_number());
}

#[test]
fn validate_normalizes_scenarios() {
    let o = urllc(&["validate", "--scenario", DEFAULTS]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["system"]["M"], 100);
    assert_eq!(v["devices"].as_array().unwrap().len(), 10);
}

#[test]
fn gp_solve_reports_solutions_and_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let ok = write("ok.gp", "var x y\nmax x * y\nsum: x + y <= 2.0\n");
    let o = urllc(&["gp-solve", ok.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for v in csv_column(&stdout(&o), "value") {
        assert!((v - 1.0).abs() < 1e-6);
    }
    let bad = write("bad.gp", "var x\nmax x\nlo: 2.0 * x^-1.0 <= 1.0\nhi: x <= 1.0\n");
    let o = urllc(&["gp-solve", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(Path::new(&bad).exists());
}
