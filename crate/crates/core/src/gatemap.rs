//! From geometry to quantum control: adjoint representation, gate
//! fidelities, total torsion compensation (TTC) and pulse extraction.
//!
//! The drive Hamiltonian is H = Ω/2 (cos Φ σx + sin Φ σy) + Δ/2 σz with
//! Ω = κ and Φ̇ − Δ = τ, time being the arclength of the curve.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frenet::{cumulative_integral, FrenetData};
use crate::linalg::{Mat2c, Mat3, Vec3};

/// Frame grid for pulse extraction. The gate error of the sampled pulse
/// falls roughly as h⁴; this size also resolves sharp torsion spikes near
/// almost-inflections.
pub const PULSE_GRID: usize = 8193;

/// Pulse gauge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    /// No detuning; Φ is the accumulated torsion.
    Xy,
    /// Constant detuning chosen by total torsion compensation.
    Ttc,
}

impl std::str::FromStr for ControlMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xy" => Ok(Self::Xy),
            "ttc" => Ok(Self::Ttc),
            other => Err(Error::Configuration(format!("mode: unknown control mode '{other}' (expected xy or ttc)"))),
        }
    }
}

impl std::fmt::Display for ControlMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Xy => "xy",
            Self::Ttc => "ttc",
        })
    }
}

/// Target single-qubit gate with its adjoint representation.
#[derive(Debug, Clone, PartialEq)]
pub struct GateTarget {
    pub u: Mat2c,
    pub adjoint: Mat3<f64>,
}

impl GateTarget {
    pub fn new(u: Mat2c) -> Result<Self> {
        let adjoint = adjoint_of_su2(&u)?;
        Ok(Self { u, adjoint })
    }

    /// One of `identity`, `x`, `y`, `z`, `hadamard`.
    pub fn named(name: &str) -> Result<Self> {
        let (o, z, i) = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 1.0));
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let u = match name.to_ascii_lowercase().as_str() {
            "identity" | "i" | "id" => Mat2c::identity(),
            "x" => Mat2c::new(z, o, o, z),
            "y" => Mat2c::new(z, -i, i, z),
            "z" => Mat2c::new(o, z, z, -o),
            "hadamard" | "h" => Mat2c::new(r, r, r, -r),
            other => {
                return Err(Error::Configuration(format!(
                    "gate: unknown gate '{other}' (expected identity, x, y, z or hadamard)"
                )))
            }
        };
        Self::new(u)
    }
}

/// R^{ij} = ½ tr(u† σ_i u σ_j) without the unitarity check.
pub fn adjoint_unchecked(u: &Mat2c) -> Mat3<f64> {
    let ud = u.dagger();
    let mut m = [[0.0; 3]; 3];
    for (i, row) in m.iter_mut().enumerate() {
        let a = ud * Mat2c::pauli(i) * *u;
        for (j, e) in row.iter_mut().enumerate() {
            *e = 0.5 * (a * Mat2c::pauli(j)).trace().re;
        }
    }
    Mat3 { m }
}

pub fn adjoint_of_su2(u: &Mat2c) -> Result<Mat3<f64>> {
    let dev = (u.dagger() * *u).max_abs_diff(&Mat2c::identity());
    if !(dev <= 1e-10) {
        return Err(Error::Domain(format!("matrix is not unitary (‖u†u − I‖ = {dev:.3e})")));
    }
    Ok(adjoint_unchecked(u))
}

/// Average gate fidelity (tr(mm†) + |tr m|²)/6 of m = U U_g†.
pub fn gate_fidelity_su2(m: &Mat2c) -> f64 {
    ((*m * m.dagger()).trace().re + m.trace().norm_sqr()) / 6.0
}

/// 1 − F for a unitary m, free of cancellation when the error is small.
pub fn gate_infidelity_su2(m: &Mat2c) -> f64 {
    let c2 = m.trace().norm_sqr() / 4.0;
    let s2: f64 = (0..3).map(|k| (*m * Mat2c::pauli(k)).trace().norm_sqr() / 4.0).sum();
    if s2 + c2 == 0.0 {
        return 1.0;
    }
    2.0 / 3.0 * s2 / (s2 + c2)
}

/// (3 + tr(R_gᵀ R))/6.
pub fn gate_fidelity_adjoint(rg: &Mat3<f64>, r: &Mat3<f64>) -> f64 {
    (3.0 + (rg.transpose() * *r).trace()) / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcSolution {
    /// Detuning Δ.
    pub delta: f64,
    /// T_g Δ.
    pub t_g_delta: f64,
    pub k_star: i64,
}

/// Constant detuning with T_gΔ = θ_B + (2k*−M−1)π − ∫τ and |T_gΔ| minimal;
/// an exact tie goes to the positive value.
pub fn ttc_detuning(theta_b: f64, m: usize, total_torsion: f64, t_g: f64) -> Result<TtcSolution> {
    if !(t_g > 0.0) {
        return Err(Error::Domain(format!("gate time must be positive, got {t_g}")));
    }
    let base = theta_b - (m as f64 + 1.0) * PI - total_torsion;
    let k0 = (-base / (2.0 * PI)).floor() as i64;
    let val = |k: i64| base + 2.0 * PI * k as f64;
    let (a, b) = (val(k0), val(k0 + 1));
    let tie = (a.abs() - b.abs()).abs() <= 1e-12 * (a.abs() + b.abs());
    let k_star = if tie {
        if a > b {
            k0
        } else {
            k0 + 1
        }
    } else if a.abs() < b.abs() {
        k0
    } else {
        k0 + 1
    };
    let t_g_delta = val(k_star);
    Ok(TtcSolution { delta: t_g_delta / t_g, t_g_delta, k_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TtcRecord {
    #[serde(rename = "theta_B")]
    pub theta_b: f64,
    #[serde(rename = "M")]
    pub m: usize,
    pub total_torsion: f64,
    pub k_star: i64,
    #[serde(rename = "T_g_delta")]
    pub t_g_delta: f64,
    #[serde(rename = "T_g")]
    pub t_g: f64,
}

/// Control waveforms on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlFields {
    pub t: Vec<f64>,
    /// Signed envelope Ω.
    pub omega: Vec<f64>,
    pub phi: Vec<f64>,
    pub delta: Vec<f64>,
    pub mode: ControlMode,
    pub theta_b: Option<f64>,
    pub ttc: Option<TtcRecord>,
}

/// Phase that pairs with a nonnegative envelope: Φ plus π per singular point passed.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiEffective {
    pub phi_eff: Vec<f64>,
}

impl ControlFields {
    pub fn duration(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn omega_x(&self) -> Vec<f64> {
        self.omega.iter().zip(&self.phi).map(|(o, p)| o * p.cos()).collect()
    }

    pub fn omega_y(&self) -> Vec<f64> {
        self.omega.iter().zip(&self.phi).map(|(o, p)| o * p.sin()).collect()
    }

    /// Cubic interpolation of (Ω, Φ, Δ) at time `t` on the uniform grid;
    /// linear when there are fewer than four samples.
    pub fn sample(&self, t: f64) -> (f64, f64, f64) {
        let n = self.t.len();
        let t_end = self.t[n - 1];
        let s = (t / t_end * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let u = s - i as f64;
        if n < 4 {
            let lerp = |v: &[f64]| v[i] + u * (v[i + 1] - v[i]);
            return (lerp(&self.omega), lerp(&self.phi), lerp(&self.delta));
        }
        let b = i.saturating_sub(1).min(n - 4);
        let r = u + (i - b) as f64;
        // Lagrange weights on nodes 0, 1, 2, 3 at position r.
        let w = [
            -(r - 1.0) * (r - 2.0) * (r - 3.0) / 6.0,
            r * (r - 2.0) * (r - 3.0) / 2.0,
            -r * (r - 1.0) * (r - 3.0) / 2.0,
            r * (r - 1.0) * (r - 2.0) / 6.0,
        ];
        let cubic = |v: &[f64]| w[0] * v[b] + w[1] * v[b + 1] + w[2] * v[b + 2] + w[3] * v[b + 3];
        (cubic(&self.omega), cubic(&self.phi), cubic(&self.delta))
    }

    /// Equivalent pulse with Ω ≥ 0 and π phase jumps at the singular times.
    pub fn nonnegative(&self, singular_times: &[f64]) -> (ControlFields, PhiEffective) {
        let mut out = self.clone();
        let mut phi_eff = Vec::with_capacity(self.t.len());
        for (k, &t) in self.t.iter().enumerate() {
            let passed = singular_times.iter().filter(|&&ts| ts <= t).count();
            let sign = if passed % 2 == 0 { 1.0 } else { -1.0 };
            out.omega[k] = sign * self.omega[k];
            phi_eff.push(self.phi[k] + PI * passed as f64);
        }
        out.phi = phi_eff.clone();
        (out, PhiEffective { phi_eff })
    }

    pub fn is_finite(&self) -> bool {
        [&self.t, &self.omega, &self.phi, &self.delta].iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Φ at the frame samples: ∫₀^t τ dt′ + Δ t, integrated in x with the same
/// rule as the total torsion, so Φ(T_g) matches it exactly.
pub fn phase_on_nodes(fd: &FrenetData<f64>, delta: f64) -> Vec<f64> {
    let density: Vec<f64> = fd.samples.iter().map(|s| s.tau * s.gamma).collect();
    let mut phi = cumulative_integral(&density, fd.step());
    for (p, s) in phi.iter_mut().zip(&fd.samples) {
        *p += delta * s.t;
    }
    phi
}

/// Cubic Lagrange weights of the four nodes `x[0..4]` at `t`.
fn lagrange4(x: &[f64], t: f64) -> [f64; 4] {
    let mut w = [1.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            if i != j {
                w[i] *= (t - x[j]) / (x[i] - x[j]);
            }
        }
    }
    w
}

/// Cubic interpolation of (t_i, v_i) on increasing nodes onto `grid`.
fn resample(nodes: &[f64], values: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut j = 0;
    grid.iter()
        .map(|&t| {
            while j + 2 < n && nodes[j + 1] < t {
                j += 1;
            }
            if n < 4 {
                let (a, b) = (nodes[j], nodes[j + 1]);
                let w = if b > a { ((t - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
                return values[j] + w * (values[j + 1] - values[j]);
            }
            let s = j.saturating_sub(1).min(n - 4);
            let w = lagrange4(&nodes[s..s + 4], t.clamp(nodes[0], nodes[n - 1]));
            (0..4).map(|i| w[i] * values[s + i]).sum()
        })
        .collect()
}

/// Uniform time samples no coarser than the closest pair of frame nodes,
/// between the frame size and 16× the frame intervals.
fn default_time_samples(nodes: &[f64]) -> usize {
    let k = nodes.len();
    let min_dt = nodes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let need = (nodes[k - 1] / min_dt).ceil();
    if need.is_finite() {
        (need as usize + 1).clamp(k, 16 * (k - 1) + 1)
    } else {
        16 * (k - 1) + 1
    }
}

/// Pulses from a frame: Ω = κ, Φ = ∫τ (+ Δt under TTC), on `n_time`
/// uniform times (by default fine enough to keep every frame feature).
pub fn extract_controls(
    fd: &FrenetData<f64>,
    mode: ControlMode,
    theta_b: Option<f64>,
    n_time: Option<usize>,
) -> Result<ControlFields> {
    let t_g = fd.total_length;
    let (delta, ttc) = match mode {
        ControlMode::Xy => (0.0, None),
        ControlMode::Ttc => {
            let theta = theta_b.ok_or_else(|| {
                Error::Configuration("theta_B: TTC mode needs a gate context with a BARQ angle".into())
            })?;
            let m = fd.singular_count();
            let sol = ttc_detuning(theta, m, fd.total_torsion, t_g)?;
            let rec = TtcRecord {
                theta_b: theta,
                m,
                total_torsion: fd.total_torsion,
                k_star: sol.k_star,
                t_g_delta: sol.t_g_delta,
                t_g,
            };
            (sol.delta, Some(rec))
        }
    };
    let nodes = fd.times();
    let n = n_time.unwrap_or_else(|| default_time_samples(&nodes));
    if n < 2 {
        return Err(Error::Domain(format!("time grid needs at least 2 samples, got {n}")));
    }
    let kappa: Vec<f64> = fd.samples.iter().map(|s| s.kappa).collect();
    let phi_nodes = phase_on_nodes(fd, delta);
    let grid: Vec<f64> = (0..n).map(|k| if k + 1 == n { t_g } else { t_g * k as f64 / (n - 1) as f64 }).collect();
    let omega = resample(&nodes, &kappa, &grid);
    let phi = resample(&nodes, &phi_nodes, &grid);
    Ok(ControlFields { t: grid, omega, phi, delta: vec![delta; n], mode, theta_b, ttc })
}

/// R_F with rows (−B, N, T).
pub fn frame_matrix(b: Vec3<f64>, n: Vec3<f64>, t: Vec3<f64>) -> Mat3<f64> {
    Mat3::from_rows(-b, n, t)
}

/// R_{U₀}(t_i) = R_Z(Φ_i) R_F(t_i) R_F(0)ᵀ at every frame sample, using the
/// continuous frame and the phase `phi` given on the same samples.
pub fn predicted_adjoint(fd: &FrenetData<f64>, phi: &[f64]) -> Vec<Mat3<f64>> {
    let s0 = &fd.samples[0];
    let f0t = frame_matrix(s0.binormal, s0.normal, s0.tangent).transpose();
    fd.samples
        .iter()
        .zip(phi)
        .map(|(s, &p)| Mat3::rot_z(p) * frame_matrix(s.binormal, s.normal, s.tangent) * f0t)
        .collect()
}

/// Same evolution from the conventional frame (unsigned curvature), whose
/// binormal and normal jump at singular points; Φ_eff absorbs the jumps.
pub fn predicted_adjoint_conventional(fd: &FrenetData<f64>, phi: &[f64]) -> Vec<Mat3<f64>> {
    let conv = |i: usize| {
        let s = &fd.samples[i];
        let f = s.switching as f64;
        frame_matrix(s.binormal.scale(f), s.normal.scale(f), s.tangent)
    };
    let f0t = conv(0).transpose();
    (0..fd.len())
        .map(|i| {
            let flips = if fd.samples[i].switching == fd.samples[0].switching { 0.0 } else { 1.0 };
            Mat3::rot_z(phi[i] + PI * flips) * conv(i) * f0t
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::FnCurve;
    use crate::frenet::evaluate_frenet;
    use proptest::prelude::*;

    fn random_su2(a: [f64; 4]) -> Mat2c {
        let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt().max(1e-9);
        Mat2c::su2_rotation([a[0] / n, a[1] / n, a[2] / n], a[3])
            .scale(Complex64::from_polar(1.0, a[0] * 3.0))
    }

    #[test]
    fn adjoint_examples() {
        let id = GateTarget::named("identity").unwrap();
        assert!(id.adjoint.max_abs_diff(&Mat3::identity()) < 1e-15);
        let x = GateTarget::named("x").unwrap();
        let want = Mat3 { m: [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]] };
        assert!(x.adjoint.max_abs_diff(&want) < 1e-15);
        let h = GateTarget::named("hadamard").unwrap();
        let want = Mat3 { m: [[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]] };
        assert!(h.adjoint.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = Mat2c::identity().scale(Complex64::new(1.1, 0.0));
        assert!(matches!(adjoint_of_su2(&m), Err(Error::Domain(_))));
    }

    #[test]
    fn z_rotation_adjoint_is_rot_z() {
        let u = Mat2c::su2_rotation([0.0, 0.0, 1.0], 0.8);
        assert!(adjoint_unchecked(&u).max_abs_diff(&Mat3::rot_z(0.8)) < 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        assert!((gate_fidelity_su2(&Mat2c::identity()) - 1.0).abs() < 1e-15);
        let ph = Mat2c::identity().scale(Complex64::from_polar(1.0, 0.77));
        assert!((gate_fidelity_su2(&ph) - 1.0).abs() < 1e-15);
        assert!((gate_fidelity_su2(&Mat2c::pauli(2)) - 1.0 / 3.0).abs() < 1e-15);
        assert!((gate_infidelity_su2(&Mat2c::pauli(2)) - 2.0 / 3.0).abs() < 1e-15);
        let r = Mat3::identity();
        assert!((gate_fidelity_adjoint(&r, &r) - 1.0).abs() < 1e-15);
        let pi_rot = Mat3::rot_z(PI);
        assert!((gate_fidelity_adjoint(&r, &pi_rot) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ttc_examples() {
        let s = ttc_detuning(0.0, 0, 0.0, 1.0).unwrap();
        assert!((s.t_g_delta - PI).abs() < 1e-15);
        assert_eq!(s.k_star, 1);
        let s = ttc_detuning(PI / 2.0, 1, 0.0, 1.0).unwrap();
        assert!((s.t_g_delta - PI / 2.0).abs() < 1e-15);
        assert_eq!(s.k_star, 1);
        let s = ttc_detuning(0.3, 2, 0.3 + (2.0 * 4.0 - 3.0) * PI, 2.0).unwrap();
        assert!(s.delta.abs() < 1e-14);
        assert!(ttc_detuning(0.0, 0, 0.0, 0.0).is_err());
    }

    #[test]
    fn circle_pulses_in_xy_mode() {
        let circle = FnCurve::new(12, |x: f64, q: usize| {
            let w = 2.0 * PI;
            let a = w * x;
            let s = w.powi(q as i32);
            match q % 4 {
                0 if q == 0 => [a.cos() - 1.0, a.sin(), 0.0],
                0 => [s * a.cos(), s * a.sin(), 0.0],
                1 => [-s * a.sin(), s * a.cos(), 0.0],
                2 => [-s * a.cos(), -s * a.sin(), 0.0],
                _ => [s * a.sin(), -s * a.cos(), 0.0],
            }
        });
        let fd = evaluate_frenet(&circle, 513).unwrap();
        let cf = extract_controls(&fd, ControlMode::Xy, None, Some(300)).unwrap();
        assert!((cf.duration() - 2.0 * PI).abs() < 1e-10);
        assert!(cf.omega.iter().all(|o| (o - 1.0).abs() < 1e-10));
        assert!(cf.phi.iter().all(|p| p.abs() < 1e-10));
        assert!(cf.delta.iter().all(|d| *d == 0.0));
        assert!(matches!(extract_controls(&fd, ControlMode::Ttc, None, None), Err(Error::Configuration(_))));
        let r = predicted_adjoint(&fd, &phase_on_nodes(&fd, 0.0));
        assert!(r[0].max_abs_diff(&Mat3::identity()) < 1e-15);
    }

    proptest! {
        #[test]
        fn adjoint_homomorphism(a in prop::array::uniform4(-3.0f64..3.0), b in prop::array::uniform4(-3.0f64..3.0)) {
            let (u, v) = (random_su2(a), random_su2(b));
            let ruv = adjoint_of_su2(&(u * v)).unwrap();
            let prod = adjoint_of_su2(&u).unwrap() * adjoint_of_su2(&v).unwrap();
            prop_assert!(ruv.max_abs_diff(&prod) < 1e-12);
            prop_assert!((ruv.det() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn fidelity_formulas_agree(a in prop::array::uniform4(-3.0f64..3.0), b in prop::array::uniform4(-3.0f64..3.0)) {
            let (u, g) = (random_su2(a), random_su2(b));
            let f1 = gate_fidelity_su2(&(u * g.dagger()));
            let f2 = gate_fidelity_adjoint(&adjoint_unchecked(&g), &adjoint_unchecked(&u));
            prop_assert!((f1 - f2).abs() < 1e-12);
            prop_assert!(((1.0 - f1) - gate_infidelity_su2(&(u * g.dagger()))).abs() < 1e-12);
        }

        #[test]
        fn ttc_exactness(theta in -10.0f64..10.0, m in 0usize..6, torsion in -50.0f64..50.0, tg in 0.1f64..20.0) {
            let s = ttc_detuning(theta, m, torsion, tg).unwrap();
            let phi_end = torsion + s.delta * tg;
            prop_assert!((phi_end + (m as f64 + 1.0) * PI - theta).cos() > 1.0 - 1e-12);
            prop_assert!(s.t_g_delta.abs() <= PI * (1.0 + 1e-12));
        }
    }
}
