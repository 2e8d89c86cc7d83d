use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_micromorph");

fn minimal(n: usize, extra: &str) -> String {
    format!(
        r#"{{
  "grid": {{"counts": [{n}, {n}, {n}]}},
  "parameters": {{"mu_e": 1, "lambda_e": 0, "mu_c": 0, "mu_micro": 1, "lambda_micro": 0, "L_c": 1}}{extra}
}}"#
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

#[test]
fn check_on_minimal_config_passes() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.json", &minimal(9, ""));
    let o = run(&["check", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["passed"], true);
    assert!(v["identities"]["div_curl_relative"].as_f64().unwrap() <= 1e-12);
    assert!(v["identities"]["curl_grad_relative"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn negative_mu_e_is_a_validation_failure() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.json", &minimal(9, "").replace("\"mu_e\": 1", "\"mu_e\": -1"));
    let o = run(&["check", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "config");
    let v = e["violations"].as_array().unwrap();
    assert!(v.iter().any(|x| x["pointer"] == "/parameters/mu_e" && x["message"].as_str().unwrap().contains("mu_e > 0")));
}

#[test]
fn simulate_with_zero_final_time_writes_initial_record_only() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.json", &minimal(6, r#", "time": {"T": 0, "cfl_safety": 0.5, "record_every": 1}"#));
    let out = d.path().join("out");
    let o = run(&["simulate", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("energy.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let side: Value = serde_json::from_str(&fs::read_to_string(out.join("energy.csv.meta.json")).unwrap()).unwrap();
    assert_eq!(side["config"]["grid"]["counts"][0], 6);
    assert_eq!(side["config"]["time"]["T"], 0.0);
}

#[test]
fn simulate_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "c.json",
        &minimal(
            7,
            r#", "time": {"T": 0.3, "cfl_safety": 0.5, "record_every": 5}, "initial": {"kind": "random_modes"}"#,
        ),
    );
    let outs: Vec<String> = (0..2)
        .map(|i| {
            let out = d.path().join(format!("o{i}"));
            let o = run(&["simulate", &cfg, "--out-dir", out.to_str().unwrap(), "--seed", "11"]);
            assert_eq!(o.status.code(), Some(0));
            fs::read_to_string(out.join("energy.csv")).unwrap()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert!(outs[0].lines().count() > 2);
}

#[test]
fn simulate_then_probe() {
    let d = tempfile::tempdir().unwrap();
    let extra = r#",
  "time": {"T": 0.5, "cfl_safety": 0.5, "record_every": 4},
  "initial": {"kind": "standing_wave"},
  "outputs": {"directory": "traj", "snapshot_every": 4},
  "probe": {"cutoff": {"outer": {"lo": [0.1875, 0.1875, 0.1875], "hi": [0.5625, 0.5625, 0.5625]},
                       "inner": {"lo": [0.3125, 0.3125, 0.3125], "hi": [0.375, 0.375, 0.375]}},
            "h": [0.0625, 0.125, 0.25]}"#;
    let cfg = write(d.path(), "c.json", &minimal(17, extra));
    let o = run(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = d.path().join("traj");
    assert!(traj.join("snapshot_00000000.bin").exists());
    let out = d.path().join("probe");
    let o = run(&["probe", &cfg, traj.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["max_ratio"].as_f64().unwrap() >= 1.0);
    assert_eq!(v["axis_ratios"].as_array().unwrap().len(), 3);
    assert!(out.join("probe.csv").exists() && out.join("probe.csv.meta.json").exists());
}

#[test]
fn non_lattice_probe_step_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    let extra = r#",
  "probe": {"cutoff": {"outer": {"lo": [0.125, 0.125, 0.125], "hi": [0.75, 0.75, 0.75]},
                       "inner": {"lo": [0.3125, 0.3125, 0.3125], "hi": [0.5625, 0.5625, 0.5625]}},
            "h": [0.07]}"#;
    let cfg = write(d.path(), "c.json", &minimal(17, extra));
    let o = run(&["check", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let e = stderr_json(&o);
    assert_eq!(e["violations"][0]["pointer"], "/probe/h/0");
    assert!(e["violations"][0]["message"].as_str().unwrap().contains("0.07"));
}

#[test]
fn mms_poly2_reports_floor() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("m");
    let o = run(&["mms", "poly2", "9", "17", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert_eq!(v["summary"]["floor_reached"], true);
    assert!(out.join("convergence.csv").exists());
}

#[test]
fn unknown_mms_case_exits_with_validation_code() {
    let o = run(&["mms", "cubic", "9", "17"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"], "unknown_case");
}

#[test]
fn dispersion_writes_branches_and_gaps() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "c.json",
        &minimal(9, r#", "dispersion": {"direction": [1, 0, 0], "k_max": 6.0, "samples": 32}"#),
    );
    let out = d.path().join("d");
    let o = run(&["dispersion", &cfg, "--out-dir", out.to_str().unwrap(), "--threads", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(out.join("dispersion.json")).unwrap()).unwrap();
    assert_eq!(r["branches"].as_array().unwrap().len(), 32);
    assert_eq!(r["branches"][0].as_array().unwrap().len(), 12);
    assert!(r["gaps"].is_array());
    let csv = fs::read_to_string(out.join("dispersion.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn missing_config_file_is_reported_with_path() {
    let o = run(&["check", "/nonexistent/c.json"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "io");
    assert!(e["message"].as_str().unwrap().contains("/nonexistent/c.json"));
}
