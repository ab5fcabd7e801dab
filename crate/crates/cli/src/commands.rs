//! Subcommand implementations. Each argument struct doubles as the JSON
//! config schema of its command: a flag overrides the key of the same name.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use curveforge::barq::{build_control_points, verify_gate_encoding, BarqConfig, LambdaKey, LambdaSetting, PgfKind};
use curveforge::bench::{
    self, cfi_infidelity, filter_function, linspace, logspace, mc_infidelity, overlap_infidelity_psd, static_sweep,
    default_steps, resolved_pulses, PsdModel, Reference, PULSE_TOLERANCE,
};
use curveforge::bezier::{BezierCurve, ControlPointSet};
use curveforge::frenet::{evaluate_frenet, FrenetData, DEFAULT_GRID};
use curveforge::gatemap::{extract_controls, ControlFields, ControlMode, GateTarget};
use curveforge::io::{self, CurveFile, DesignFile};
use curveforge::linalg::Mat2c;
use curveforge::optimize::{run_adam, total_loss, AdamConfig, BarqObjective, LossSpec, RabiMax};
use curveforge::Error;

use crate::config::{manifest_path, resolve, Manifest};
use crate::CliError;

type Res<T> = Result<T, CliError>;

// ---------------------------------------------------------------- shared

fn target_from(gate: &Option<String>, unitary: &Option<Vec<f64>>) -> Res<Option<GateTarget>> {
    match (gate, unitary) {
        (Some(_), Some(_)) => Err(CliError::validation("gate: give either gate or unitary, not both".into())),
        (Some(g), None) => Ok(Some(GateTarget::named(g)?)),
        (None, Some(u)) => {
            let v: [f64; 8] = u.as_slice().try_into().map_err(|_| {
                CliError::validation(format!("unitary: expected 8 reals (Re/Im of a, b, c, d), got {}", u.len()))
            })?;
            let t = GateTarget::new(Mat2c::from_reals(v)).map_err(|e| CliError::validation(format!("unitary: {e}")))?;
            Ok(Some(t))
        }
        (None, None) => Ok(None),
    }
}

/// A curve with the gate context it was designed for, when known.
struct Source {
    points: ControlPointSet<f64>,
    theta_b: Option<f64>,
    target: Option<GateTarget>,
}

fn load_source(curve: &Option<PathBuf>, design: &Option<PathBuf>) -> Res<Source> {
    let wrap = |field: &str, p: &Path, e: Error| CliError::validation(format!("{field}: {}: {e}", p.display()));
    match (curve, design) {
        (Some(_), Some(_)) => Err(CliError::validation("curve: give either curve or design, not both".into())),
        (None, None) => Err(CliError::validation("curve: one of curve or design is required".into())),
        (None, Some(p)) => {
            let d = io::read_design(p).map_err(|e| wrap("design", p, e))?;
            let cfg = d.config().map_err(|e| wrap("design", p, e))?;
            let params = d.parameters(&cfg).map_err(|e| wrap("design", p, e))?;
            let points = build_control_points(&params, &cfg)?;
            Ok(Source { points, theta_b: Some(params.theta(&cfg)), target: Some(cfg.target) })
        }
        (Some(p), None) => {
            let f: CurveFile = io::read_json(p).map_err(|e| wrap("curve", p, e))?;
            let points = f.control_points().map_err(|e| wrap("curve", p, e))?;
            let meta = f.metadata.unwrap_or(Value::Null);
            let theta_b = meta.get("theta_B").and_then(Value::as_f64);
            let target = match meta.get("target_unitary") {
                Some(v) => {
                    let u: [f64; 8] = serde_json::from_value(v.clone())
                        .map_err(|e| CliError::validation(format!("curve: metadata.target_unitary: {e}")))?;
                    Some(GateTarget::new(Mat2c::from_reals(u)).map_err(|e| wrap("curve", p, e))?)
                }
                None => None,
            };
            Ok(Source { points, theta_b, target })
        }
    }
}

fn frenet(points: &ControlPointSet<f64>, grid: usize) -> Res<FrenetData<f64>> {
    if grid < 3 {
        return Err(CliError::validation(format!("grid: need at least 3 samples, got {grid}")));
    }
    Ok(evaluate_frenet(&BezierCurve::new(points.clone()), grid)?)
}

/// Frame and pulses on `grid` samples, or on the refined grid from
/// [`resolved_pulses`] when no grid is given.
fn pulse_frame(
    src: &Source,
    grid: Option<usize>,
    mode: ControlMode,
    theta_b: Option<f64>,
    n_time: Option<usize>,
) -> Res<(FrenetData<f64>, ControlFields)> {
    let theta = theta_b.or(src.theta_b);
    match grid {
        Some(g) => {
            let fd = frenet(&src.points, g)?;
            let fields = extract_controls(&fd, mode, theta, n_time)?;
            Ok((fd, fields))
        }
        None => {
            let (fd, fields) = resolved_pulses(&BezierCurve::new(src.points.clone()), mode, theta, PULSE_TOLERANCE)?;
            match n_time {
                None => Ok((fd, fields)),
                Some(n) => {
                    let fields = extract_controls(&fd, mode, theta, Some(n))?;
                    Ok((fd, fields))
                }
            }
        }
    }
}

fn prepare(path: &Path) -> Res<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d)
            .map_err(|e| CliError::validation(format!("out: cannot create {}: {e}", d.display()))),
        _ => Ok(()),
    }
}

fn finish(mut manifest: Manifest, primary: &Path, summary: Value) -> Res<()> {
    let path = manifest_path(primary);
    manifest.outputs.push(path.clone());
    manifest.summary = summary.clone();
    io::write_json(&path, &manifest)?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    Ok(())
}

fn parse_mode(mode: &Option<String>) -> Res<ControlMode> {
    Ok(mode.as_deref().unwrap_or("ttc").parse::<ControlMode>()?)
}

// ---------------------------------------------------------------- design

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignArgs {
    /// JSON config; flags override its fields.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// identity, x, y, z or hadamard.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<String>,
    /// Target as 8 reals: Re/Im of U00, U01, U10, U11.
    #[arg(long, num_args = 8, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unitary: Option<Vec<f64>>,
    /// Number of free points [default: 10].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_free: Option<usize>,
    /// Boundary scale ν [default: 0.5].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    /// BARQ angle θ_B [default: 0].
    #[arg(long = "theta-b")]
    #[serde(rename = "theta_B", skip_serializing_if = "Option::is_none")]
    pub theta_b: Option<f64>,
    #[arg(long = "optimize-theta-b", num_args = 0..=1, default_missing_value = "true")]
    #[serde(rename = "optimize_theta_B", skip_serializing_if = "Option::is_none")]
    pub optimize_theta_b: Option<bool>,
    /// symmetric or general [default: symmetric].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pgf: Option<PgfKind>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tie_lambda3: Option<bool>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_overrides: Option<std::collections::BTreeMap<LambdaKey, LambdaSetting>>,
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free_points: Option<Vec<[f64; 3]>>,
    /// Seed for the initial free points.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Adam steps [default: 5000].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_final: Option<f64>,
    /// Trace record interval [default: 100].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Weight of J_Rabi [default: 0.01].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_weight: Option<f64>,
    /// `{"smooth": {"p": 32}}` or `"exact"` (config only).
    #[arg(skip)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_max: Option<RabiMax>,
    /// Frame samples during optimization [default: 513].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt_grid: Option<usize>,
    /// Output prefix [default: design].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn design(flags: DesignArgs) -> Res<()> {
    let (a, config) = resolve(flags.config.as_deref(), &flags)?;
    let target = target_from(&a.gate, &a.unitary)?
        .ok_or_else(|| CliError::validation("gate: one of gate or unitary is required".into()))?;
    let mut cfg = BarqConfig::new(target, a.n_free.unwrap_or(10), a.nu.unwrap_or(0.5));
    if a.pgf == Some(PgfKind::General) {
        cfg = cfg.general();
    }
    cfg.theta_b = a.theta_b.unwrap_or(0.0);
    cfg.optimize_theta_b = a.optimize_theta_b.unwrap_or(false);
    if let Some(t) = a.tie_lambda3 {
        cfg.tie_lambda3 = t;
    }
    cfg.overrides = a.lambda_overrides.clone().unwrap_or_default();
    cfg.validate()?;
    if a.free_points.is_none() && a.seed.is_none() {
        return Err(CliError::validation("seed: required unless free_points are given".into()));
    }
    let start = DesignFile { free_points: a.free_points.clone(), ..DesignFile::from_config(&cfg, a.seed) };
    let params = start.parameters(&cfg)?;

    let steps = a.steps.unwrap_or(5000);
    let mut loss = LossSpec::drive_rabi(a.rabi_weight.unwrap_or(1e-2));
    loss.rabi_max = a.rabi_max.unwrap_or_default();
    let defaults = AdamConfig::default();
    let hp = AdamConfig {
        lr: a.lr.unwrap_or(defaults.lr),
        stride: a.stride.unwrap_or(defaults.stride),
        lr_final: a.lr_final,
        ..defaults
    };
    hp.validate()?;
    let mut obj = BarqObjective::new(cfg.clone(), loss.clone())?;
    if let Some(g) = a.opt_grid {
        obj = obj.with_grid(g);
    }

    let prefix = a.out.clone().unwrap_or_else(|| PathBuf::from("design"));
    let (design_path, curve_path, trace_path) = (
        with_suffix(&prefix, ".design.json"),
        with_suffix(&prefix, ".curve.json"),
        with_suffix(&prefix, ".trace.csv"),
    );
    prepare(&design_path)?;

    let trace = match run_adam(&obj, &params.to_vector(), steps, &hp) {
        Ok(t) => t,
        Err(Error::Divergence { step, reason, trace }) => {
            io::write_trace(&trace_path, &trace)?;
            return Err(CliError::Numerical {
                message: format!("optimization diverged at step {step}: {reason}"),
                trace: Some(trace_path),
            });
        }
        Err(e) => return Err(e.into()),
    };

    let fin = curveforge::barq::BarqParameters::from_vector(&cfg, &trace.final_params)?;
    let points = build_control_points(&fin, &cfg)?;
    let theta = fin.theta(&cfg);
    let encoding_error = verify_gate_encoding(&points, &cfg.target, theta)?;
    let fd = frenet(&points, DEFAULT_GRID)?;
    let (total, terms) = total_loss(&fd, &loss);

    let design_file = DesignFile::with_parameters(&cfg, &fin, a.seed);
    let meta = json!({
        "theta_B": theta,
        "target_unitary": cfg.target.u.to_reals(),
        "nu": cfg.nu,
        "n_free": cfg.n_free,
    });
    io::write_json(&design_path, &design_file)?;
    io::write_curve(&curve_path, &points, Some(meta))?;
    io::write_trace(&trace_path, &trace)?;

    let (first, last) = (trace.first(), trace.last());
    let summary = json!({
        "steps": steps,
        "initial": { "total": first.total, "drive": trace.term(first, "drive"), "rabi": trace.term(first, "rabi") },
        "final": { "total": last.total, "drive": trace.term(last, "drive"), "rabi": trace.term(last, "rabi") },
        "final_report_grid": { "grid": DEFAULT_GRID, "total": total, "drive": terms[0], "rabi": terms[1] },
        "encoding_error": encoding_error,
        "M": fd.singular_count(),
        "T_g": fd.total_length,
    });
    let mut m = Manifest::new("design", &config, a.seed);
    m.outputs = vec![design_path.clone(), curve_path, trace_path];
    finish(m, &design_path, summary)
}

// ---------------------------------------------------------------- pulse

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Curve interchange file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    /// Design file, rebuilt into its curve.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    /// xy or ttc [default: ttc].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Overrides the BARQ angle stored with the curve.
    #[arg(long = "theta-b")]
    #[serde(rename = "theta_B", skip_serializing_if = "Option::is_none")]
    pub theta_b: Option<f64>,
    /// Frame samples [default: refined until the gate converges].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Output time samples [default: grid].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_time: Option<usize>,
    /// Emit Ω ≥ 0 with π phase jumps at the singular points.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonnegative: Option<bool>,
    /// [default: pulse.csv]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn pulse(flags: PulseArgs) -> Res<()> {
    let (a, config) = resolve(flags.config.as_deref(), &flags)?;
    let src = load_source(&a.curve, &a.design)?;
    let (fd, mut fields) = pulse_frame(&src, a.grid, parse_mode(&a.mode)?, a.theta_b, a.n_time)?;
    if a.nonnegative.unwrap_or(false) {
        fields = fields.nonnegative(&fd.singular_times()).0;
    }
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("pulse.csv"));
    prepare(&out)?;
    io::write_pulse(&out, &fields, &fd)?;
    let side = io::PulseSidecar::new(&fields, &fd);
    let mut m = Manifest::new("pulse", &config, None);
    m.outputs = vec![out.clone(), out.with_extension("json")];
    finish(m, &out, serde_json::to_value(side).unwrap())
}

// ---------------------------------------------------------------- frame

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    /// Frame samples [default: 2049].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// [default: frame.csv]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn frame(flags: FrameArgs) -> Res<()> {
    let (a, config) = resolve(flags.config.as_deref(), &flags)?;
    let src = load_source(&a.curve, &a.design)?;
    let fd = frenet(&src.points, a.grid.unwrap_or(DEFAULT_GRID))?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("frame.csv"));
    prepare(&out)?;
    io::write_frame(&out, &fd)?;
    let mut m = Manifest::new("frame", &config, None);
    m.outputs = vec![out.clone(), out.with_extension("json")];
    finish(m, &out, serde_json::to_value(io::FrameSidecar::new(&fd)).unwrap())
}

// ---------------------------------------------------------------- bench-static

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// The target gate of the design.
    Target,
    /// The same pulse without noise.
    NoiseFree,
}

fn reference_for<'a>(kind: Option<ReferenceKind>, target: &'a Option<GateTarget>) -> Res<(Reference<'a>, ReferenceKind)> {
    let kind = kind.unwrap_or(if target.is_some() { ReferenceKind::Target } else { ReferenceKind::NoiseFree });
    match (kind, target) {
        (ReferenceKind::NoiseFree, _) => Ok((Reference::NoiseFree, kind)),
        (ReferenceKind::Target, Some(t)) => Ok((Reference::Target(&t.u), kind)),
        (ReferenceKind::Target, None) => Err(CliError::validation(
            "reference: target needs a design, curve metadata, gate or unitary".into(),
        )),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchStaticArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    /// Reference gate when the curve carries none.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gate: Option<String>,
    #[arg(long, num_args = 8, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unitary: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[arg(long = "theta-b")]
    #[serde(rename = "theta_B", skip_serializing_if = "Option::is_none")]
    pub theta_b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Relative drive error range [default: -0.1 0.1].
    #[arg(long, num_args = 2, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Vec<f64>>,
    /// T_g δz range [default: -0.5 0.5].
    #[arg(long, num_args = 2, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tg_delta_z: Option<Vec<f64>>,
    /// [default: 41]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_epsilon: Option<usize>,
    /// [default: 41]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_delta_z: Option<usize>,
    /// Propagation steps [default: twice the pulse samples, at least 8192].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// [default: target when known, else noise-free]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceKind>,
    /// [default: sweep.csv]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn range(v: &Option<Vec<f64>>, field: &str, default: (f64, f64)) -> Res<(f64, f64)> {
    match v.as_deref() {
        None => Ok(default),
        Some(&[a, b]) if a.is_finite() && b.is_finite() => Ok((a, b)),
        Some(other) => Err(CliError::validation(format!("{field}: expected two finite values, got {other:?}"))),
    }
}

pub fn bench_static(flags: BenchStaticArgs) -> Res<()> {
    let (a, config) = resolve(flags.config.as_deref(), &flags)?;
    let mut src = load_source(&a.curve, &a.design)?;
    if let Some(t) = target_from(&a.gate, &a.unitary)? {
        src.target = Some(t);
    }
    let (_, fields) = pulse_frame(&src, a.grid, parse_mode(&a.mode)?, a.theta_b, None)?;
    let grid = bench::SweepGrid::default();
    let (e0, e1) = range(&a.epsilon, "epsilon", grid.epsilon)?;
    let (d0, d1) = range(&a.tg_delta_z, "tg_delta_z", grid.tg_delta_z)?;
    let eps = linspace(e0, e1, a.n_epsilon.unwrap_or(grid.n_epsilon));
    let dz = linspace(d0, d1, a.n_delta_z.unwrap_or(grid.n_delta_z));
    let (reference, kind) = reference_for(a.reference, &src.target)?;
    let sweep = static_sweep(&fields, reference, &eps, &dz, a.steps.unwrap_or_else(|| default_steps(&fields)))?;

    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("sweep.csv"));
    prepare(&out)?;
    io::write_sweep(&out, &sweep)?;
    let worst = sweep.infidelity.iter().flatten().cloned().fold(0.0, f64::max);
    let best = sweep.infidelity.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let mut m = Manifest::new("bench-static", &config, None);
    m.outputs = vec![out.clone()];
    finish(m, &out, json!({ "reference": kind, "min_infidelity": best, "max_infidelity": worst, "T_g": fields.duration() }))
}

// ---------------------------------------------------------------- bench-dynamic

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchDynamicArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[arg(long = "theta-b")]
    #[serde(rename = "theta_B", skip_serializing_if = "Option::is_none")]
    pub theta_b: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// PSD exponent, 1 or 2 [default: 2].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Noise amplitude λ in rad per unit time.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Noise amplitude as T_g λ, in rad.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tg_lambda: Option<f64>,
    /// [default: 200]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realizations: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Propagation steps and noise samples, a power of two [default: twice the pulse samples, at least 8192].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    /// [default: noise-free]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceKind>,
    /// [default: mc.json]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn bench_dynamic(flags: BenchDynamicArgs) -> Res<()> {
    let (a, config) = resolve(flags.config.as_deref(), &flags)?;
    let seed = a.seed.ok_or_else(|| CliError::validation("seed: required for Monte Carlo runs".into()))?;
    let src = load_source(&a.curve, &a.design)?;
    let (fd, fields) = pulse_frame(&src, a.grid, parse_mode(&a.mode)?, a.theta_b, None)?;
    let t_g = fd.total_length;
    let lambda = match (a.lambda, a.tg_lambda) {
        (Some(l), None) => l,
        (None, Some(tl)) => tl / t_g,
        (Some(_), Some(_)) => return Err(CliError::validation("lambda: give either lambda or tg_lambda, not both".into())),
        (None, None) => return Err(CliError::validation("lambda: one of lambda or tg_lambda is required".into())),
    };
    let model = PsdModel::new(a.alpha.unwrap_or(2.0), lambda)?;
    let (reference, kind) = reference_for(Some(a.reference.unwrap_or(ReferenceKind::NoiseFree)), &src.target)?;
    let mc = mc_infidelity(
        &fields,
        &model,
        reference,
        a.realizations.unwrap_or(200),
        seed,
        a.steps.unwrap_or_else(|| default_steps(&fields)),
    )?;

    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("mc.json"));
    prepare(&out)?;
    io::write_mc(&out, &mc)?;
    // Filter-function predictions need only the reporting grid.
    let report = frenet(&src.points, DEFAULT_GRID)?;
    let cfi_route = if model.alpha == 2.0 { cfi_infidelity(&report, lambda).ok() } else { None };
    let summary = json!({
        "mc": mc,
        "reference": kind,
        "T_g": t_g,
        "overlap_prediction": overlap_infidelity_psd(&report, &model),
        "cfi_prediction": cfi_route,
    });
    let mut m = Manifest::new("bench-dynamic", &config, Some(seed));
    m.outputs = vec![out.clone()];
    finish(m, &out, summary)
}

// ---------------------------------------------------------------- filterfn

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterfnArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Lowest frequency in units of 2π/T_g [default: 0.001].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_min: Option<f64>,
    /// Highest frequency in units of 2π/T_g [default: 200].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_max: Option<f64>,
    /// Log-spaced frequencies [default: 2048].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// [default: filter.csv]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn filterfn(flags: FilterfnArgs) -> Res<()> {
    let (a, config) = resolve(flags.config.as_deref(), &flags)?;
    let src = load_source(&a.curve, &a.design)?;
    let fd = frenet(&src.points, a.grid.unwrap_or(DEFAULT_GRID))?;
    let (lo, hi) = (
        a.omega_min.unwrap_or(bench::filter::OVERLAP_OMEGA_MIN),
        a.omega_max.unwrap_or(bench::filter::OVERLAP_OMEGA_MAX),
    );
    let n = a.n.unwrap_or(2048);
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(CliError::validation(format!("omega_min: need 0 < omega_min < omega_max and n ≥ 2, got {lo}, {hi}, {n}")));
    }
    let wb = 2.0 * std::f64::consts::PI / fd.total_length;
    let table = filter_function(&fd, &logspace(lo * wb, hi * wb, n));
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("filter.csv"));
    prepare(&out)?;
    io::write_filter(&out, &table)?;
    let mut m = Manifest::new("filterfn", &config, None);
    m.outputs = vec![out.clone()];
    finish(m, &out, json!({ "T_g": fd.total_length, "omega_B": wb, "n": n }))
}

// ---------------------------------------------------------------- cfi

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfiArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub design: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Also report the α = 2 infidelity at this noise amplitude.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// [default: cfi.json]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn cfi(flags: CfiArgs) -> Res<()> {
    let (a, config) = resolve(flags.config.as_deref(), &flags)?;
    let src = load_source(&a.curve, &a.design)?;
    let fd = frenet(&src.points, a.grid.unwrap_or(DEFAULT_GRID))?;
    let value = bench::cfi(&fd)?;
    let infidelity = a.lambda.map(|l| cfi_infidelity(&fd, l)).transpose()?;
    let result = json!({
        "cfi": value,
        "T_g": fd.total_length,
        "closure_gap": fd.closure_gap(),
        "lambda": a.lambda,
        "infidelity": infidelity,
    });
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("cfi.json"));
    prepare(&out)?;
    io::write_json(&out, &result)?;
    let mut m = Manifest::new("cfi", &config, None);
    m.outputs = vec![out.clone()];
    finish(m, &out, result)
}
