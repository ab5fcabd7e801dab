use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use curveforge::barq::build_control_points;
use curveforge::bench::{self, default_steps, linspace, resolved_pulses, static_sweep, Reference, PULSE_TOLERANCE};
use curveforge::bezier::BezierCurve;
use curveforge::gatemap::{ControlMode, GateTarget};
use curveforge::io;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curveforge")).args(args).output().unwrap()
}

fn cli_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curveforge")).args(args).env(key, value).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A short X-gate design under `dir`, returning the output prefix.
fn short_design(dir: &Path) -> PathBuf {
    let prefix = dir.join("x");
    let out = cli(&["design", "--gate", "x", "--nu", "0.25", "--steps", "40", "--seed", "3", "--out", s(&prefix)]);
    ok(&out);
    prefix
}

fn with(prefix: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", prefix.display()))
}

#[test]
fn design_writes_all_outputs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    for suffix in [".design.json", ".curve.json", ".trace.csv", ".design.manifest.json"] {
        assert!(with(&prefix, suffix).exists(), "missing {suffix}");
    }
    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(with(&prefix, ".design.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "design");
    assert_eq!(manifest["seed"], 3);
    let hash = hex::encode(Sha256::digest(manifest["config"].to_string().as_bytes()));
    assert_eq!(manifest["config_hash"], hash);
    let trace = std::fs::read_to_string(with(&prefix, ".trace.csv")).unwrap();
    assert!(trace.starts_with("step,total,drive,rabi,grad_norm\n"));
}

#[test]
fn pulse_matches_in_process_pipeline_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    let pulse = dir.path().join("p.csv");
    ok(&cli(&["pulse", "--design", s(&with(&prefix, ".design.json")), "--out", s(&pulse)]));

    let design = io::read_design(&with(&prefix, ".design.json")).unwrap();
    let cfg = design.config().unwrap();
    let params = design.parameters(&cfg).unwrap();
    let points = build_control_points(&params, &cfg).unwrap();
    assert_eq!(io::read_curve(&with(&prefix, ".curve.json")).unwrap(), points);
    let (_, fields) =
        resolved_pulses(&BezierCurve::new(points), ControlMode::Ttc, Some(params.theta(&cfg)), PULSE_TOLERANCE).unwrap();
    assert_eq!(std::fs::read_to_string(&pulse).unwrap(), io::pulse_csv(&fields));
}

#[test]
fn curve_and_design_inputs_give_the_same_pulse() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&cli(&["pulse", "--design", s(&with(&prefix, ".design.json")), "--out", s(&a)]));
    ok(&cli(&["pulse", "--curve", s(&with(&prefix, ".curve.json")), "--out", s(&b)]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn manifest_replay_reproduces_output() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    let first = dir.path().join("first.csv");
    ok(&cli(&["pulse", "--curve", s(&with(&prefix, ".curve.json")), "--grid", "1025", "--out", s(&first)]));
    let second = dir.path().join("second.csv");
    ok(&cli(&["pulse", "--config", s(&first.with_extension("manifest.json")), "--out", s(&second)]));
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn bench_static_matches_in_process_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    let out = dir.path().join("sweep.csv");
    let curve = with(&prefix, ".curve.json");
    ok(&cli(&["bench-static", "--curve", s(&curve), "--n-epsilon", "3", "--n-delta-z", "2", "--out", s(&out)]));

    let design = io::read_design(&with(&prefix, ".design.json")).unwrap();
    let cfg = design.config().unwrap();
    let params = design.parameters(&cfg).unwrap();
    let points = io::read_curve(&curve).unwrap();
    let (_, fields) =
        resolved_pulses(&BezierCurve::new(points), ControlMode::Ttc, Some(params.theta(&cfg)), PULSE_TOLERANCE).unwrap();
    let grid = bench::SweepGrid::default();
    let eps = linspace(grid.epsilon.0, grid.epsilon.1, 3);
    let dz = linspace(grid.tg_delta_z.0, grid.tg_delta_z.1, 2);
    let target = GateTarget::named("x").unwrap().u;
    let sweep = static_sweep(&fields, Reference::Target(&target), &eps, &dz, default_steps(&fields)).unwrap();
    assert_eq!(std::fs::read_to_string(&out).unwrap(), io::sweep_csv(&sweep));
}

#[test]
fn bench_dynamic_is_seeded_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    let curve = with(&prefix, ".curve.json");
    let run = |name: &str, seed: &str, threads: &str| {
        let out = dir.path().join(name);
        let args = [
            "bench-dynamic", "--curve", s(&curve), "--tg-lambda", "0.3", "--realizations", "6", "--seed", seed,
            "--grid", "1025", "--out", s(&out),
        ];
        ok(&cli_env(&args, "CURVEFORGE_THREADS", threads));
        std::fs::read_to_string(&out).unwrap()
    };
    let a = run("a.json", "9", "1");
    assert_eq!(a, run("b.json", "9", "2"));
    assert_ne!(a, run("c.json", "10", "1"));
}

#[test]
fn cfi_on_open_curve_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("open.json");
    std::fs::write(
        &curve,
        r#"{"version": 1, "degree": 3, "points": [[0,0,0],[1,0,0],[1,1,0],[1,1,1]]}"#,
    )
    .unwrap();
    let out = cli(&["cfi", "--curve", s(&curve), "--out", s(&dir.path().join("c.json"))]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("closed"));
}

#[test]
fn cfi_on_design_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    let out = cli(&["cfi", "--curve", s(&with(&prefix, ".curve.json")), "--out", s(&dir.path().join("c.json"))]);
    ok(&out);
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["cfi"].as_f64().unwrap() > 0.0, "{summary}");
}

#[test]
fn invalid_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cli(&["nonsense"])), 2);
    assert_eq!(code(&cli(&["design", "--gate", "foo", "--seed", "1"])), 2);
    assert_eq!(code(&cli(&["design", "--gate", "x", "--out", s(&dir.path().join("d"))])), 2);
    assert_eq!(code(&cli(&["pulse"])), 2);

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"gate": "x", "seed": 1, "stepz": 3}"#).unwrap();
    let out = cli(&["design", "--config", s(&cfg)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("stepz"));

    let out = cli_env(&["filterfn"], "CURVEFORGE_THREADS", "zero");
    assert_eq!(code(&out), 2);
}

#[test]
fn frame_and_filterfn_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = short_design(dir.path());
    let curve = with(&prefix, ".curve.json");
    let frame = dir.path().join("frame.csv");
    ok(&cli(&["frame", "--curve", s(&curve), "--grid", "257", "--out", s(&frame)]));
    let text = std::fs::read_to_string(&frame).unwrap();
    assert_eq!(text.lines().count(), 258);
    let side: Value = serde_json::from_str(&std::fs::read_to_string(frame.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["closure_gap"], 0.0);

    let filt = dir.path().join("f.csv");
    ok(&cli(&["filterfn", "--curve", s(&curve), "--n", "16", "--out", s(&filt)]));
    let text = std::fs::read_to_string(&filt).unwrap();
    assert!(text.starts_with("omega,F\n"));
    assert_eq!(text.lines().count(), 17);
}
