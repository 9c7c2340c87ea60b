use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn twistqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistqkd")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn help_and_usage_exit_codes() {
    assert_eq!(twistqkd(&["--help"]).status.code(), Some(0));
    assert_eq!(twistqkd(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(twistqkd(&["bounds", "--s", "minus"]).status.code(), Some(2));
}

#[test]
fn run_without_seed_is_refused() {
    let out = twistqkd(&["run-ppp", "--n", "2000"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn run_ppp_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 20000, "seed": 5}"#).unwrap();
    let paths: Vec<_> = (0..2).map(|i| dir.path().join(format!("run{i}.json"))).collect();
    for p in &paths {
        let out = twistqkd(&["run-ppp", "--config", cfg.to_str().unwrap(), "--out", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty(), "--out keeps stdout clean");
    }
    let (a, b) = (fs::read(&paths[0]).unwrap(), fs::read(&paths[1]).unwrap());
    assert_eq!(a, b);
    let t: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(t["seed"], 5);
    assert_eq!(t["kind"], "ppp");
}

#[test]
fn flags_override_the_config() {
    let out = twistqkd(&["run-pm", "--seed", "3", "--n", "20000", "--set", "s=30"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = stdout_json(&out);
    assert_eq!(t["kind"], "pm");
    assert_eq!(t["config"]["n"], 20000);
    assert_eq!(t["config"]["s"], 30);
}

#[test]
fn bad_config_is_a_usage_error() {
    let out = twistqkd(&["run-ppp", "--seed", "1", "--set", "delta=3.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bounds_json_shape() {
    let out = twistqkd(&["bounds", "--n", "1000000000000000000"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    for key in ["params", "f", "log2_f", "insecurity", "vacuous", "terms", "binding_constraint", "solver"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["params"]["m_x"], 256000);
    assert!(v["log2_f"].as_f64().unwrap() <= -40.0 + 1e-6);
    assert_eq!(v["vacuous"]["f"], false);

    // infeasible n falls back and reports a vacuous bound instead of failing
    let v = stdout_json(&twistqkd(&["bounds", "--n", "100000"]));
    assert_eq!(v["solver"]["feasible"], false);
    assert_eq!(v["vacuous"]["f"], true);
}

#[test]
fn solve_params_exit_codes() {
    let ok = twistqkd(&["solve-params", "--n", "1000000000000000000"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout_json(&ok)["all_checks_hold"], true);
    let bad = twistqkd(&["solve-params", "--n", "100000"]);
    assert_eq!(bad.status.code(), Some(1));
    assert_eq!(stdout_json(&bad)["feasible"], false);
}

#[test]
fn verify_example_passes_and_fails_honestly() {
    let ok = twistqkd(&["verify-example"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(stdout_json(&ok)["all_passed"], true);
    // far from the PPT point the example's identities no longer hold
    let off = twistqkd(&["verify-example", "--p", "0.9"]);
    assert_eq!(off.status.code(), Some(1));
}

#[test]
fn estimate_reports_exact_values() {
    let v = stdout_json(&twistqkd(&["estimate", "--seed", "2", "--n", "40000"]));
    assert!((v["eps_x_exact"].as_f64().unwrap() - 0.4143).abs() < 1e-3);
    let uh = &v["candidates"][1];
    assert_eq!(uh["twisting"], "u_h");
    assert!(uh["eps_z_exact"].as_f64().unwrap() < 1e-3);
}

#[test]
fn pm_ensemble_is_normalised() {
    let out = twistqkd(&["pm-ensemble"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["ensembles"].as_array().unwrap().len(), 9);
    assert!(v["six_state"]["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(twistqkd(&["pm-ensemble", "--basis", "XQ"]).status.code(), Some(2));
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let args = |threads: &'static str| {
        ["sweep", "--seeds", "0..3", "--n", "20000", "--kappa", "0.001,0.01", "--eve-x", "0.3", "--threads", threads]
    };
    let a = twistqkd(&args("1"));
    let b = twistqkd(&args("3"));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("seed,p,kappa"));
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.ends_with(",true")), "a 0.3 bit-flip Eve always aborts");
}
