//! Verification of designs by direct propagation.

pub mod filter;
pub mod noise;
pub mod propagate;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use filter::{filter_function, overlap_grid, overlap_infidelity, overlap_infidelity_psd};
pub use noise::{estimate_psd_slope, fir_impulse_response, generate_colored_noise, loglog_slope, NoiseGenerator, PsdModel};
pub use propagate::{default_steps, propagate, propagate_to, Noise, DEFAULT_STEPS};

use crate::curve::ParametricCurve;
use crate::error::{Error, Result};
use crate::frenet::{evaluate_frenet, FrenetData};
use crate::gatemap::{extract_controls, gate_infidelity_su2, ControlFields, ControlMode, PULSE_GRID};
use crate::linalg::Mat2c;

/// What a noisy propagator is compared against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    Target(&'a Mat2c),
    /// The same pulse without noise, isolating the noise-induced error.
    NoiseFree,
}

impl Reference<'_> {
    fn resolve(&self, fields: &ControlFields, n_steps: usize) -> Result<Mat2c> {
        match *self {
            Reference::Target(u) => Ok(*u),
            Reference::NoiseFree => propagate(fields, &Noise::None, n_steps),
        }
    }
}

fn infidelity(u: &Mat2c, reference: &Mat2c) -> f64 {
    gate_infidelity_su2(&(*u * reference.dagger()))
}

/// Largest frame grid tried by [`resolved_pulses`].
pub const MAX_PULSE_GRID: usize = (1 << 17) + 1;

/// Default agreement between successive refinements, as an infidelity.
pub const PULSE_TOLERANCE: f64 = 1e-10;

/// Frame and pulses on a grid fine enough for the noise-free propagator to
/// stop changing: the grid starts at [`PULSE_GRID`] and doubles until two
/// successive propagators agree within `tol` (an infidelity).
pub fn resolved_pulses<C: ParametricCurve<f64> + ?Sized>(
    curve: &C,
    mode: ControlMode,
    theta_b: Option<f64>,
    tol: f64,
) -> Result<(FrenetData<f64>, ControlFields)> {
    let mut grid = PULSE_GRID;
    let mut prev: Option<Mat2c> = None;
    loop {
        let fd = evaluate_frenet(curve, grid)?;
        let fields = extract_controls(&fd, mode, theta_b, None)?;
        let u = propagate(&fields, &Noise::None, default_steps(&fields))?;
        if let Some(p) = prev {
            let gap = infidelity(&u, &p);
            if gap < tol {
                return Ok((fd, fields));
            }
            if grid >= MAX_PULSE_GRID {
                return Err(Error::Evaluation(format!(
                    "pulses not resolved at {grid} frame samples (refinement changes the gate by {gap:.2e})"
                )));
            }
        }
        prev = Some(u);
        grid = 2 * grid - 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticSweep {
    pub epsilon: Vec<f64>,
    /// Dephasing axis as T_g δz.
    pub tg_delta_z: Vec<f64>,
    /// Row i, column j: infidelity at (ε_i, δz_j).
    pub infidelity: Vec<Vec<f64>>,
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|k| if k + 1 == n { hi } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 }).collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), n).into_iter().map(f64::exp).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub epsilon: (f64, f64),
    pub tg_delta_z: (f64, f64),
    pub n_epsilon: usize,
    pub n_delta_z: usize,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self { epsilon: (-0.1, 0.1), tg_delta_z: (-0.5, 0.5), n_epsilon: 41, n_delta_z: 41 }
    }
}

impl SweepGrid {
    pub fn axes(&self) -> (Vec<f64>, Vec<f64>) {
        (
            linspace(self.epsilon.0, self.epsilon.1, self.n_epsilon),
            linspace(self.tg_delta_z.0, self.tg_delta_z.1, self.n_delta_z),
        )
    }
}

/// Infidelity over a grid of quasi-static (ε, T_g δz).
pub fn static_sweep(
    fields: &ControlFields,
    reference: Reference,
    epsilon: &[f64],
    tg_delta_z: &[f64],
    n_steps: usize,
) -> Result<StaticSweep> {
    if epsilon.iter().chain(tg_delta_z).any(|v| !v.is_finite()) {
        return Err(Error::Configuration("sweep grid: values must be finite".into()));
    }
    let u_ref = reference.resolve(fields, n_steps)?;
    let t_g = fields.duration();
    let rows = epsilon
        .par_iter()
        .map(|&eps| {
            tg_delta_z
                .iter()
                .map(|&d| {
                    let u = propagate(fields, &Noise::Static { epsilon: eps, delta_z: d / t_g }, n_steps)?;
                    Ok(infidelity(&u, &u_ref))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StaticSweep { epsilon: epsilon.to_vec(), tg_delta_z: tg_delta_z.to_vec(), infidelity: rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseAxis {
    Epsilon,
    /// T_g δz.
    DeltaZ,
}

/// Fitted log-log slope of the noise-induced infidelity along one axis
/// over [lo, hi] (positive), with the other noise source off.
pub fn infidelity_slope(
    fields: &ControlFields,
    axis: NoiseAxis,
    range: (f64, f64),
    n_points: usize,
    n_steps: usize,
) -> Result<f64> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) || n_points < 2 {
        return Err(Error::Configuration(format!("slope range: need 0 < lo < hi and ≥ 2 points, got {range:?}")));
    }
    let xs = logspace(lo, hi, n_points);
    let sweep = match axis {
        NoiseAxis::Epsilon => static_sweep(fields, Reference::NoiseFree, &xs, &[0.0], n_steps)?,
        NoiseAxis::DeltaZ => static_sweep(fields, Reference::NoiseFree, &[0.0], &xs, n_steps)?,
    };
    let ys: Vec<f64> = match axis {
        NoiseAxis::Epsilon => sweep.infidelity.iter().map(|r| r[0]).collect(),
        NoiseAxis::DeltaZ => sweep.infidelity[0].clone(),
    };
    if ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Evaluation("infidelity vanished at a fit point; slope undefined".into()));
    }
    Ok(loglog_slope(&xs, &ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
    pub alpha: f64,
    pub lambda: f64,
}

/// Mean infidelity over independent δz(t) realizations. Realization i uses
/// RNG substream i of `seed`; the mean is reduced in index order, so the
/// result does not depend on the number of workers.
pub fn mc_infidelity(
    fields: &ControlFields,
    model: &PsdModel,
    reference: Reference,
    n_realizations: usize,
    seed: u64,
    n_steps: usize,
) -> Result<McResult> {
    if n_realizations < 2 {
        return Err(Error::Configuration(format!("n_realizations: need at least 2, got {n_realizations}")));
    }
    let gen = NoiseGenerator::new(*model, n_steps)?;
    let u_ref = reference.resolve(fields, n_steps)?;
    let values = (0..n_realizations)
        .into_par_iter()
        .map(|i| {
            let trace = gen.sample(seed, i as u64);
            let u = propagate(fields, &Noise::Trace { epsilon: 0.0, delta_z: &trace }, n_steps)?;
            Ok(infidelity(&u, &u_ref))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(McResult { mean, stderr: (var / n).sqrt(), n: n_realizations, seed, alpha: model.alpha, lambda: model.lambda })
}

/// Curve filtering index (1/T_g³)∫‖r‖² dt of a closed curve.
pub fn cfi(fd: &FrenetData<f64>) -> Result<f64> {
    let gap = fd.closure_gap();
    if !(gap < 1e-8) {
        return Err(Error::Precondition(format!(
            "the curve filtering index is defined for closed curves only (closure gap {gap:.3e} ≥ 1e-8)"
        )));
    }
    Ok(fd.cfi())
}

/// First-order infidelity for α = 2 noise from the CFI:
/// (T_g λ)² (T_g ω_B)² CFI / 6.
pub fn cfi_infidelity(fd: &FrenetData<f64>, lambda: f64) -> Result<f64> {
    let c = cfi(fd)?;
    let tl = fd.total_length * lambda;
    Ok(tl * tl * (2.0 * std::f64::consts::PI).powi(2) * c / 6.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub static_sweep: Option<StaticSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_fn: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cfi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap_infidelity: Option<f64>,
}
