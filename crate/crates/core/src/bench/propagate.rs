//! Piecewise-constant propagation of the noisy control Hamiltonian
//! H = (1+ε)Ω/2 (cos Φ σx + sin Φ σy) + (Δ + δz)/2 σz.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gatemap::ControlFields;
use crate::linalg::Mat2c;

pub const DEFAULT_STEPS: usize = 8192;

#[derive(Debug, Clone, Copy, Default)]
pub enum Noise<'a> {
    #[default]
    None,
    Static {
        epsilon: f64,
        delta_z: f64,
    },
    /// One δz sample per step, held constant over the step.
    Trace {
        epsilon: f64,
        delta_z: &'a [f64],
    },
}

impl Noise<'_> {
    fn epsilon(&self) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Static { epsilon, .. } | Noise::Trace { epsilon, .. } => epsilon,
        }
    }

    fn delta_z(&self, k: usize) -> f64 {
        match *self {
            Noise::None => 0.0,
            Noise::Static { delta_z, .. } => delta_z,
            Noise::Trace { delta_z, .. } => delta_z[k],
        }
    }
}

/// Power-of-two step count with at least two steps per field sample and
/// never below [`DEFAULT_STEPS`].
pub fn default_steps(fields: &ControlFields) -> usize {
    (2 * fields.t.len()).next_power_of_two().max(DEFAULT_STEPS)
}

/// exp(−i (h·σ/2) dt).
pub fn step_unitary(h: [f64; 3], dt: f64) -> Mat2c {
    let norm = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    if norm == 0.0 {
        return Mat2c::identity();
    }
    let (s, c) = (0.5 * norm * dt).sin_cos();
    let (nx, ny, nz) = (h[0] / norm * s, h[1] / norm * s, h[2] / norm * s);
    Mat2c::new(Complex64::new(c, -nz), Complex64::new(-ny, -nx), Complex64::new(ny, -nx), Complex64::new(c, nz))
}

fn check(fields: &ControlFields, noise: &Noise, n_steps: usize) -> Result<()> {
    if !fields.is_finite() {
        return Err(Error::Domain("control fields contain non-finite samples".into()));
    }
    if fields.t.len() < 2 {
        return Err(Error::Domain("control fields need at least 2 samples".into()));
    }
    if n_steps < fields.t.len() {
        return Err(Error::Configuration(format!(
            "n_steps: {n_steps} is below the number of field samples ({})",
            fields.t.len()
        )));
    }
    match *noise {
        Noise::Trace { delta_z, epsilon } => {
            if delta_z.len() < n_steps {
                return Err(Error::Configuration(format!(
                    "noise trace has {} samples, need one per step ({n_steps})",
                    delta_z.len()
                )));
            }
            if !epsilon.is_finite() || delta_z[..n_steps].iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("noise trace contains non-finite samples".into()));
            }
        }
        Noise::Static { epsilon, delta_z } if !(epsilon.is_finite() && delta_z.is_finite()) => {
            return Err(Error::Domain("static noise must be finite".into()));
        }
        _ => {}
    }
    Ok(())
}

/// Propagator over the full pulse.
pub fn propagate(fields: &ControlFields, noise: &Noise, n_steps: usize) -> Result<Mat2c> {
    propagate_to(fields, noise, n_steps, fields.duration())
}

/// Propagator over [0, t_end] in `n_steps` equal steps, fields sampled at
/// step midpoints.
pub fn propagate_to(fields: &ControlFields, noise: &Noise, n_steps: usize, t_end: f64) -> Result<Mat2c> {
    check(fields, noise, n_steps)?;
    if !(t_end >= 0.0 && t_end <= fields.duration() * (1.0 + 1e-12)) {
        return Err(Error::Domain(format!("t_end = {t_end} is outside the pulse")));
    }
    let dt = t_end / n_steps as f64;
    let gain = 1.0 + noise.epsilon();
    let mut u = Mat2c::identity();
    for k in 0..n_steps {
        let (omega, phi, delta) = fields.sample((k as f64 + 0.5) * dt);
        let (s, c) = phi.sin_cos();
        let h = [gain * omega * c, gain * omega * s, delta + noise.delta_z(k)];
        u = step_unitary(h, dt) * u;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gatemap::{gate_fidelity_su2, ControlMode, GateTarget};
    use std::f64::consts::PI;

    fn constant(omega: f64, phi: f64, delta: f64, dur: f64, n: usize) -> ControlFields {
        ControlFields {
            t: (0..n).map(|k| dur * k as f64 / (n - 1) as f64).collect(),
            omega: vec![omega; n],
            phi: vec![phi; n],
            delta: vec![delta; n],
            mode: ControlMode::Xy,
            theta_b: None,
            ttc: None,
        }
    }

    #[test]
    fn zero_fields_give_identity() {
        let u = propagate(&constant(0.0, 0.0, 0.0, 1.0, 8), &Noise::None, 64).unwrap();
        assert!(u.max_abs_diff(&Mat2c::identity()) < 1e-15);
    }

    #[test]
    fn rabi_pi_pulse_is_x() {
        let u = propagate(&constant(1.0, 0.0, 0.0, PI, 16), &Noise::None, 256).unwrap();
        let x = GateTarget::named("x").unwrap().u;
        assert!((1.0 - gate_fidelity_su2(&(u * x.dagger()))) < 1e-8);
    }

    #[test]
    fn step_matches_rotation() {
        let h: [f64; 3] = [0.3, -1.1, 0.7];
        let n = (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
        let axis = [h[0] / n, h[1] / n, h[2] / n];
        let a = step_unitary(h, 0.9);
        let b = Mat2c::su2_rotation(axis, n * 0.9);
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn static_detuning_is_z_rotation() {
        let f = constant(0.0, 0.0, 0.0, 2.0, 4);
        let u = propagate(&f, &Noise::Static { epsilon: 0.0, delta_z: 0.4 }, 8).unwrap();
        assert!(u.max_abs_diff(&Mat2c::su2_rotation([0.0, 0.0, 1.0], 0.8)) < 1e-14);
    }

    #[test]
    fn preconditions() {
        let f = constant(1.0, 0.0, 0.0, 1.0, 32);
        assert!(matches!(propagate(&f, &Noise::None, 16), Err(Error::Configuration(_))));
        let tr = vec![0.0; 10];
        assert!(propagate(&f, &Noise::Trace { epsilon: 0.0, delta_z: &tr }, 64).is_err());
        let mut bad = f.clone();
        bad.omega[3] = f64::NAN;
        assert!(matches!(propagate(&bad, &Noise::None, 64), Err(Error::Domain(_))));
    }

    #[test]
    fn stays_unitary() {
        let mut f = constant(1.0, 0.0, 0.3, 5.0, 64);
        for (k, p) in f.phi.iter_mut().enumerate() {
            *p = (k as f64 * 0.37).sin() * 3.0;
        }
        let u = propagate(&f, &Noise::Static { epsilon: 0.05, delta_z: -0.2 }, 20000).unwrap();
        assert!((u * u.dagger()).max_abs_diff(&Mat2c::identity()) < 1e-10);
    }
}
