use std::f64::consts::PI;

use curveforge::barq::{build_control_points, verify_gate_encoding, BarqConfig, BarqParameters};
use curveforge::bench::filter::OVERLAP_NODES;
use curveforge::bench::{filter_function, overlap_grid, overlap_infidelity, propagate, Noise};
use curveforge::bezier::{BezierCurve, ControlPointSet};
use curveforge::frenet::{evaluate_frenet, DEFAULT_GRID};
use curveforge::gatemap::{gate_infidelity_su2, ControlFields, ControlMode, GateTarget};
use curveforge::io;
use curveforge::linalg::Mat2c;
use proptest::prelude::*;

fn config(gate: &str) -> BarqConfig {
    BarqConfig::new(GateTarget::named(gate).unwrap(), 10, if gate == "x" { 0.25 } else { 0.5 })
}

fn smooth_pulse(n: usize) -> ControlFields {
    let t: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 / (n - 1) as f64).collect();
    ControlFields {
        omega: t.iter().map(|&t| 3.0 * (PI * t / 2.0).sin()).collect(),
        phi: t.iter().map(|&t| 0.7 * t * t).collect(),
        delta: vec![0.4; n],
        t,
        mode: ControlMode::Xy,
        theta_b: None,
        ttc: None,
    }
}

#[test]
fn propagator_converges_at_second_order() {
    let f = smooth_pulse(1025);
    let exact = propagate(&f, &Noise::None, 1 << 17).unwrap();
    let err = |n| propagate(&f, &Noise::None, n).unwrap().max_abs_diff(&exact);
    let (e1, e2) = (err(2048), err(4096));
    let order = (e1 / e2).log2();
    assert!((order - 2.0).abs() < 0.2, "observed order {order} ({e1:e} → {e2:e})");
}

#[test]
fn white_noise_overlap_is_c_tg_over_6() {
    let cfg = config("hadamard");
    let points = build_control_points(&BarqParameters::random(&cfg, 4).unwrap(), &cfg).unwrap();
    let fd = evaluate_frenet(&BezierCurve::new(points), DEFAULT_GRID).unwrap();
    let t_g = fd.total_length;
    // Linear grid: the white-noise integrand has no low-frequency weight.
    let w_max = 400.0 * 2.0 * PI / t_g;
    let omegas: Vec<f64> = (0..8001).map(|k| w_max * k as f64 / 8000.0).collect();
    let c = 0.3;
    let got = overlap_infidelity(&filter_function(&fd, &omegas), |_| c) + c / (3.0 * PI * w_max);
    let want = c * t_g / 6.0;
    assert!((got / want - 1.0).abs() < 0.01, "{got} vs {want}");
}

#[test]
fn overlap_grid_spans_the_default_band() {
    let g = overlap_grid(2.0, OVERLAP_NODES);
    let wb = PI;
    assert!((g[0] / wb - 1e-3).abs() < 1e-15);
    assert!((g[OVERLAP_NODES - 1] / wb - 200.0).abs() < 1e-10);
    assert!(g.windows(2).all(|w| w[1] > w[0]));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn construction_closes_and_encodes_gate(seed in 0u64..10_000, hadamard in any::<bool>()) {
        let gate = if hadamard { "hadamard" } else { "x" };
        let cfg = config(gate);
        let params = BarqParameters::random(&cfg, seed).unwrap();
        let points = build_control_points(&params, &cfg).unwrap();
        let p = points.points();
        prop_assert_eq!(p[0], p[p.len() - 1]);
        let err = verify_gate_encoding(&points, &cfg.target, params.theta(&cfg)).unwrap();
        prop_assert!(err < 1e-12, "encoding error {}", err);
    }

    #[test]
    fn infidelity_follows_rotation_angle(z in -1.0..1.0f64, phi in 0.0..2.0 * PI, theta in 0.0..PI) {
        let r = (1.0 - z * z).sqrt();
        let m = Mat2c::su2_rotation([r * phi.cos(), r * phi.sin(), z], theta);
        let want = 2.0 / 3.0 * (theta / 2.0).sin().powi(2);
        prop_assert!((gate_infidelity_su2(&m) - want).abs() < 1e-14);
    }

    #[test]
    fn curve_file_round_trip_is_bitwise(raw in prop::collection::vec(prop::array::uniform3(-1e3..1e3f64), 4..20)) {
        let points = ControlPointSet::from_f64(&raw).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        io::write_curve(&path, &points, None).unwrap();
        prop_assert_eq!(io::read_curve(&path).unwrap().to_f64(), raw);
    }
}
