//! File formats. Every writer goes through [`write_atomic`], so a reader
//! never sees a partial file.
//!
//! Floats are written with Rust's shortest round-trip formatting, which
//! reads back to the identical `f64`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::barq::{BarqConfig, BarqParameters, LambdaKey, LambdaSetting, PgfKind};
use crate::bench::{McResult, StaticSweep};
use crate::bezier::ControlPointSet;
use crate::error::{Error, Result};
use crate::frenet::FrenetData;
use crate::gatemap::{ControlFields, ControlMode, GateTarget};
use crate::linalg::Mat2c;
use crate::optimize::OptimizationTrace;

pub const CURVE_FORMAT_VERSION: u32 = 1;

/// Write `bytes` to a temporary file beside `path`, then rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn csv_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

// ---------------------------------------------------------------- curves

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub version: u32,
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl CurveFile {
    pub fn new(points: &ControlPointSet<f64>, metadata: Option<serde_json::Value>) -> Self {
        Self { version: CURVE_FORMAT_VERSION, degree: points.degree(), points: points.to_f64(), metadata }
    }

    pub fn control_points(&self) -> Result<ControlPointSet<f64>> {
        if self.version != CURVE_FORMAT_VERSION {
            return Err(Error::Configuration(format!(
                "version: unsupported curve format version {} (expected {CURVE_FORMAT_VERSION})",
                self.version
            )));
        }
        if self.points.len() != self.degree + 1 {
            return Err(Error::Configuration(format!(
                "points: degree {} needs {} points, got {}",
                self.degree,
                self.degree + 1,
                self.points.len()
            )));
        }
        ControlPointSet::from_f64(&self.points)
    }
}

pub fn write_curve(path: &Path, points: &ControlPointSet<f64>, metadata: Option<serde_json::Value>) -> Result<()> {
    write_json(path, &CurveFile::new(points, metadata))
}

pub fn read_curve(path: &Path) -> Result<ControlPointSet<f64>> {
    read_json::<CurveFile>(path)?.control_points()
}

// ---------------------------------------------------------------- designs

/// A BARQ design: the configuration plus, once optimized, the parameter
/// values that rebuild the curve exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    /// Re a, Im a, Re b, Im b, Re c, Im c, Re d, Im d of [[a, b], [c, d]].
    pub target_unitary: [f64; 8],
    #[serde(rename = "theta_B", default)]
    pub theta_b: f64,
    pub nu: f64,
    pub n_free: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub lambda_overrides: BTreeMap<LambdaKey, LambdaSetting>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_points: Option<Vec<[f64; 3]>>,
    #[serde(default = "default_pgf")]
    pub pgf: PgfKind,
    #[serde(default = "default_true")]
    pub tie_lambda3: bool,
    #[serde(default, rename = "optimize_theta_B")]
    pub optimize_theta_b: bool,
    /// Values of the optimizable λ slots (positive ones as logarithms).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_raw: Option<Vec<f64>>,
}

fn default_pgf() -> PgfKind {
    PgfKind::Symmetric
}

fn default_true() -> bool {
    true
}

impl DesignFile {
    pub fn from_config(cfg: &BarqConfig, seed: Option<u64>) -> Self {
        Self {
            target_unitary: cfg.target.u.to_reals(),
            theta_b: cfg.theta_b,
            nu: cfg.nu,
            n_free: cfg.n_free,
            seed,
            lambda_overrides: cfg.overrides.clone(),
            free_points: None,
            pgf: cfg.pgf,
            tie_lambda3: cfg.tie_lambda3,
            optimize_theta_b: cfg.optimize_theta_b,
            lambda_raw: None,
        }
    }

    /// Design with explicit parameter values. An optimized θ_B is stored
    /// in `theta_B`.
    pub fn with_parameters(cfg: &BarqConfig, params: &BarqParameters<f64>, seed: Option<u64>) -> Self {
        let mut d = Self::from_config(cfg, seed);
        d.free_points = Some(params.free_points.iter().map(|p| p.to_f64()).collect());
        d.lambda_raw = Some(params.lambda_raw.clone());
        if let Some(t) = params.theta_b {
            d.theta_b = t;
        }
        d
    }

    pub fn config(&self) -> Result<BarqConfig> {
        let u = Mat2c::from_reals(self.target_unitary);
        let target = GateTarget::new(u).map_err(|e| Error::Configuration(format!("target_unitary: {e}")))?;
        let mut cfg = BarqConfig::new(target, self.n_free, self.nu);
        if self.pgf == PgfKind::General {
            cfg = cfg.general();
        }
        cfg.theta_b = self.theta_b;
        cfg.overrides = self.lambda_overrides.clone();
        cfg.tie_lambda3 = self.tie_lambda3;
        cfg.optimize_theta_b = self.optimize_theta_b;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parameters from the explicit values, or drawn from `seed`.
    pub fn parameters(&self, cfg: &BarqConfig) -> Result<BarqParameters<f64>> {
        let mut p = match (&self.free_points, self.seed) {
            (Some(pts), _) => BarqParameters::with_points(cfg, pts.clone())?,
            (None, Some(seed)) => BarqParameters::random(cfg, seed)?,
            (None, None) => {
                return Err(Error::Configuration("free_points: neither free_points nor seed is given".into()))
            }
        };
        if let Some(raw) = &self.lambda_raw {
            if raw.len() != p.lambda_raw.len() {
                return Err(Error::Configuration(format!(
                    "lambda_raw: expected {} values, got {}",
                    p.lambda_raw.len(),
                    raw.len()
                )));
            }
            p.lambda_raw = raw.clone();
        }
        Ok(p)
    }
}

pub fn read_design(path: &Path) -> Result<DesignFile> {
    read_json(path)
}

// ---------------------------------------------------------------- frames

pub const FRAME_HEADER: &str = "x,t,rx,ry,rz,Tx,Ty,Tz,Nx,Ny,Nz,Bx,By,Bz,kappa,tau,gamma";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSidecar {
    pub grid_size: usize,
    #[serde(rename = "T_g")]
    pub t_g: f64,
    pub total_torsion: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub singular_times: Vec<f64>,
    pub closure_gap: f64,
    pub tangent_area: [f64; 3],
    pub inflections: Vec<crate::frenet::Inflection>,
}

impl FrameSidecar {
    pub fn new(fd: &FrenetData<f64>) -> Self {
        Self {
            grid_size: fd.samples.len(),
            t_g: fd.total_length,
            total_torsion: fd.total_torsion,
            m: fd.singular_count(),
            singular_times: fd.singular_times(),
            closure_gap: fd.closure_gap(),
            tangent_area: fd.tangent_area().to_f64(),
            inflections: fd.inflections.clone(),
        }
    }
}

pub fn frame_csv(fd: &FrenetData<f64>) -> String {
    let mut out = String::with_capacity(fd.samples.len() * 300);
    out.push_str(FRAME_HEADER);
    out.push('\n');
    for s in &fd.samples {
        let (r, t, n, b) = (s.position, s.tangent, s.normal, s.binormal);
        csv_row(
            &mut out,
            &[s.x, s.t, r.x, r.y, r.z, t.x, t.y, t.z, n.x, n.y, n.z, b.x, b.y, b.z, s.kappa, s.tau, s.gamma],
        );
    }
    out
}

/// `path` gets the CSV; the sidecar goes to `path` with extension `.json`.
pub fn write_frame(path: &Path, fd: &FrenetData<f64>) -> Result<()> {
    write_atomic(path, frame_csv(fd).as_bytes())?;
    write_json(&path.with_extension("json"), &FrameSidecar::new(fd))
}

// ---------------------------------------------------------------- pulses

pub const PULSE_HEADER: &str = "t,omega,phi,delta,omega_x,omega_y";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSidecar {
    pub mode: ControlMode,
    #[serde(rename = "theta_B")]
    pub theta_b: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub total_torsion: f64,
    #[serde(rename = "T_g_delta")]
    pub t_g_delta: Option<f64>,
    pub k_star: Option<i64>,
    #[serde(rename = "T_g")]
    pub t_g: f64,
}

impl PulseSidecar {
    pub fn new(fields: &ControlFields, fd: &FrenetData<f64>) -> Self {
        Self {
            mode: fields.mode,
            theta_b: fields.theta_b,
            m: fd.singular_count(),
            total_torsion: fd.total_torsion,
            t_g_delta: fields.ttc.map(|r| r.t_g_delta),
            k_star: fields.ttc.map(|r| r.k_star),
            t_g: fields.duration(),
        }
    }
}

pub fn pulse_csv(fields: &ControlFields) -> String {
    let (ox, oy) = (fields.omega_x(), fields.omega_y());
    let mut out = String::with_capacity(fields.t.len() * 120);
    out.push_str(PULSE_HEADER);
    out.push('\n');
    for k in 0..fields.t.len() {
        csv_row(&mut out, &[fields.t[k], fields.omega[k], fields.phi[k], fields.delta[k], ox[k], oy[k]]);
    }
    out
}

pub fn write_pulse(path: &Path, fields: &ControlFields, fd: &FrenetData<f64>) -> Result<()> {
    write_atomic(path, pulse_csv(fields).as_bytes())?;
    write_json(&path.with_extension("json"), &PulseSidecar::new(fields, fd))
}

/// Reads the columns of a pulse CSV back into fields. Mode and TTC
/// bookkeeping are not stored in the CSV and are set from `mode`.
pub fn read_pulse_csv(text: &str, mode: ControlMode) -> Result<ControlFields> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(PULSE_HEADER) {
        return Err(Error::Configuration(format!("pulse: header must be '{PULSE_HEADER}'")));
    }
    let mut f = ControlFields {
        t: vec![],
        omega: vec![],
        phi: vec![],
        delta: vec![],
        mode,
        theta_b: None,
        ttc: None,
    };
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let vals = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Configuration(format!("pulse: row {}: {e}", i + 2)))?;
        if vals.len() != 6 {
            return Err(Error::Configuration(format!("pulse: row {} has {} columns, expected 6", i + 2, vals.len())));
        }
        f.t.push(vals[0]);
        f.omega.push(vals[1]);
        f.phi.push(vals[2]);
        f.delta.push(vals[3]);
    }
    Ok(f)
}

// ---------------------------------------------------------------- traces

pub fn trace_csv(trace: &OptimizationTrace) -> String {
    let col = |name: &str| trace.term_names.iter().position(|n| n == name);
    let (drive, rabi) = (col("drive"), col("rabi"));
    let mut out = String::from("step,total,drive,rabi,grad_norm\n");
    for r in &trace.records {
        let term = |c: Option<usize>| c.map_or(f64::NAN, |i| r.terms[i]);
        write!(out, "{},", r.step).unwrap();
        csv_row(&mut out, &[r.total, term(drive), term(rabi), r.grad_norm]);
    }
    out
}

pub fn write_trace(path: &Path, trace: &OptimizationTrace) -> Result<()> {
    write_atomic(path, trace_csv(trace).as_bytes())
}

// ---------------------------------------------------------------- bench outputs

/// Rows are ε, columns T_g δz; the corner cell names the axes.
pub fn sweep_csv(sweep: &StaticSweep) -> String {
    let mut out = String::from("epsilon\\tg_delta_z");
    for d in &sweep.tg_delta_z {
        write!(out, ",{d}").unwrap();
    }
    out.push('\n');
    for (eps, row) in sweep.epsilon.iter().zip(&sweep.infidelity) {
        write!(out, "{eps},").unwrap();
        csv_row(&mut out, row);
    }
    out
}

pub fn write_sweep(path: &Path, sweep: &StaticSweep) -> Result<()> {
    write_atomic(path, sweep_csv(sweep).as_bytes())
}

pub fn write_mc(path: &Path, mc: &McResult) -> Result<()> {
    write_json(path, mc)
}

pub fn filter_csv(table: &[(f64, f64)]) -> String {
    let mut out = String::from("omega,F\n");
    for &(w, f) in table {
        csv_row(&mut out, &[w, f]);
    }
    out
}

pub fn write_filter(path: &Path, table: &[(f64, f64)]) -> Result<()> {
    write_atomic(path, filter_csv(table).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barq::build_control_points;
    use crate::bezier::BezierCurve;
    use crate::frenet::evaluate_frenet;
    use crate::gatemap::extract_controls;

    fn design() -> (BarqConfig, BarqParameters<f64>) {
        let cfg = BarqConfig::new(GateTarget::named("hadamard").unwrap(), 6, 0.5);
        let mut p = BarqParameters::random(&cfg, 3).unwrap();
        p.lambda_raw[0] = 0.123_456_789_012_345_6;
        (cfg, p)
    }

    #[test]
    fn curve_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.curve.json");
        let (cfg, p) = design();
        let w = build_control_points(&p, &cfg).unwrap();
        write_curve(&path, &w, Some(serde_json::json!({"gate": "hadamard"}))).unwrap();
        let back = read_curve(&path).unwrap();
        assert_eq!(back.to_f64(), w.to_f64());
    }

    #[test]
    fn curve_file_checks() {
        let f = CurveFile { version: 1, degree: 3, points: vec![[0.0; 3]; 3], metadata: None };
        assert!(matches!(f.control_points(), Err(Error::Configuration(m)) if m.starts_with("points")));
        let f = CurveFile { version: 2, degree: 2, points: vec![[0.0; 3]; 3], metadata: None };
        assert!(matches!(f.control_points(), Err(Error::Configuration(m)) if m.starts_with("version")));
    }

    #[test]
    fn design_round_trip_rebuilds_curve() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.design.json");
        let (cfg, p) = design();
        write_json(&path, &DesignFile::with_parameters(&cfg, &p, Some(3))).unwrap();
        let d = read_design(&path).unwrap();
        let cfg2 = d.config().unwrap();
        let p2 = d.parameters(&cfg2).unwrap();
        assert_eq!(p2, p);
        let (a, b) = (build_control_points(&p, &cfg).unwrap(), build_control_points(&p2, &cfg2).unwrap());
        assert_eq!(a.to_f64(), b.to_f64());
    }

    #[test]
    fn minimal_design_uses_seed() {
        let d: DesignFile = serde_json::from_str(
            r#"{"target_unitary": [0,0,1,0,1,0,0,0], "nu": 0.6, "n_free": 5, "seed": 11,
                "lambda_overrides": {"lambda_2": 0.4}}"#,
        )
        .unwrap();
        let cfg = d.config().unwrap();
        assert_eq!(cfg.theta_b, 0.0);
        assert_eq!(d.parameters(&cfg).unwrap(), BarqParameters::random(&cfg, 11).unwrap());
        let bad = DesignFile { target_unitary: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0], ..d };
        assert!(matches!(bad.config(), Err(Error::Configuration(m)) if m.starts_with("target_unitary")));
    }

    #[test]
    fn frame_and_pulse_tables() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, p) = design();
        let w = build_control_points(&p, &cfg).unwrap();
        let fd = evaluate_frenet(&BezierCurve::new(w), 65).unwrap();
        let fp = dir.path().join("f.csv");
        write_frame(&fp, &fd).unwrap();
        let text = std::fs::read_to_string(&fp).unwrap();
        assert_eq!(text.lines().next().unwrap(), FRAME_HEADER);
        assert_eq!(text.lines().count(), 66);
        let side: FrameSidecar = read_json(&fp.with_extension("json")).unwrap();
        assert_eq!(side.grid_size, 65);

        let f = extract_controls(&fd, ControlMode::Ttc, Some(0.0), None).unwrap();
        let pp = dir.path().join("p.csv");
        write_pulse(&pp, &f, &fd).unwrap();
        let back = read_pulse_csv(&std::fs::read_to_string(&pp).unwrap(), ControlMode::Ttc).unwrap();
        assert_eq!((back.t, back.omega, back.phi, back.delta), (f.t.clone(), f.omega.clone(), f.phi.clone(), f.delta.clone()));
        let side: serde_json::Value = read_json(&pp.with_extension("json")).unwrap();
        for key in ["mode", "theta_B", "M", "total_torsion", "T_g_delta", "k_star", "T_g"] {
            assert!(side.get(key).is_some(), "{key}");
        }
        assert_eq!(side["mode"], "ttc");
    }

    #[test]
    fn sweep_layout() {
        let s = StaticSweep { epsilon: vec![-0.1, 0.1], tg_delta_z: vec![0.0, 0.5, 1.0], infidelity: vec![vec![1.0; 3], vec![2.0; 3]] };
        let text = sweep_csv(&s);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "epsilon\\tg_delta_z,0,0.5,1");
        assert_eq!(lines[2], "0.1,2,2,2");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
