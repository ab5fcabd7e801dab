//! Dephasing filter function F_z(ω) = ½‖∫T e^{−iωt} dt‖² and its overlap
//! with a noise PSD.

use num_complex::Complex64;
use rayon::prelude::*;

use super::noise::PsdModel;
use crate::frenet::FrenetData;

/// Low and high cutoffs of the overlap integral, in units of ω_B = 2π/T_g.
pub const OVERLAP_OMEGA_MIN: f64 = 1e-3;
pub const OVERLAP_OMEGA_MAX: f64 = 200.0;
pub const OVERLAP_NODES: usize = 16384;

/// (e^z − 1)/z and ∫₀¹ s e^{zs} ds = (e^z(z − 1) + 1)/z².
fn phi_psi(z: Complex64) -> (Complex64, Complex64) {
    if z.norm() < 0.25 {
        // Σ z^k/(k+1)! and Σ z^k/(k!(k+2)).
        let mut term = Complex64::new(1.0, 0.0);
        let (mut p, mut q) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        for k in 0..14 {
            p += term / (k as f64 + 1.0);
            q += term / (k as f64 + 2.0);
            term = term * z / (k as f64 + 1.0);
        }
        (p, q)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e * (z - 1.0) + 1.0) / (z * z))
    }
}

/// ∫T e^{−iωt} dt with T linear between the frame samples, integrated
/// exactly on the (non-uniform) time nodes.
pub fn tangent_transform(fd: &FrenetData<f64>, omega: f64) -> [Complex64; 3] {
    let mut acc = [Complex64::new(0.0, 0.0); 3];
    for w in fd.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let h = b.t - a.t;
        if h <= 0.0 {
            continue;
        }
        let (p, q) = phi_psi(Complex64::new(0.0, -omega * h));
        let phase = Complex64::from_polar(h, -omega * a.t);
        let (ca, cb) = (phase * (p - q), phase * q);
        for i in 0..3 {
            acc[i] += ca * a.tangent[i] + cb * b.tangent[i];
        }
    }
    acc
}

pub fn filter_value(fd: &FrenetData<f64>, omega: f64) -> f64 {
    0.5 * tangent_transform(fd, omega).iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// Table of (ω, F_z(ω)).
pub fn filter_function(fd: &FrenetData<f64>, omegas: &[f64]) -> Vec<(f64, f64)> {
    omegas.par_iter().map(|&w| (w, filter_value(fd, w))).collect()
}

/// `n` log-spaced frequencies covering [ω_min, ω_max]·ω_B.
pub fn overlap_grid(t_g: f64, n: usize) -> Vec<f64> {
    let wb = 2.0 * std::f64::consts::PI / t_g;
    let (a, b) = ((OVERLAP_OMEGA_MIN * wb).ln(), (OVERLAP_OMEGA_MAX * wb).ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// I = (1/6π)∫S F dω over both signs of ω, i.e. (1/3π)∫₀^∞, by the
/// trapezoid rule on a table of positive frequencies.
pub fn overlap_infidelity<S: Fn(f64) -> f64>(table: &[(f64, f64)], psd: S) -> f64 {
    let integral: f64 = table
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (psd(w[0].0) * w[0].1 + psd(w[1].0) * w[1].1))
        .sum();
    integral / (3.0 * std::f64::consts::PI)
}

/// Overlap of a design with a power-law PSD on the default log grid.
pub fn overlap_infidelity_psd(fd: &FrenetData<f64>, model: &PsdModel) -> f64 {
    let t_g = fd.total_length;
    let table = filter_function(fd, &overlap_grid(t_g, OVERLAP_NODES));
    overlap_infidelity(&table, |w| model.psd(t_g, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::FnCurve;
    use crate::frenet::evaluate_frenet;
    use std::f64::consts::PI;

    #[test]
    fn series_matches_closed_form() {
        for z in [Complex64::new(0.0, 0.2), Complex64::new(0.0, -0.26), Complex64::new(0.1, 0.2)] {
            let e = z.exp();
            let (p, q) = phi_psi(z);
            assert!((p - (e - 1.0) / z).norm() < 1e-13);
            assert!((q - (e * (z - 1.0) + 1.0) / (z * z)).norm() < 1e-12);
        }
    }

    #[test]
    fn straight_segment() {
        // A line has no frame; build the record by hand.
        let circle = FnCurve::new(4, |x: f64, q: usize| {
            let a = 2.0 * PI * x;
            let w = (2.0 * PI).powi(q as i32);
            let (s, c) = (a + q as f64 * PI / 2.0).sin_cos();
            [w * c, w * s, 0.0]
        });
        let mut fd: FrenetData<f64> = evaluate_frenet(&circle, 101).unwrap();
        let dur = 3.0;
        for (k, s) in fd.samples.iter_mut().enumerate() {
            s.t = dur * k as f64 / 100.0;
            s.tangent = crate::linalg::Vec3::new(1.0, 0.0, 0.0);
        }
        for w in [0.01, 0.7, 5.0] {
            let want = 2.0 * (w * dur / 2.0).sin().powi(2) / (w * w);
            assert!((filter_value(&fd, w) - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn circle_dc_and_symmetry() {
        let circle = FnCurve::new(4, |x: f64, q: usize| {
            let a = 2.0 * PI * x;
            let w = (2.0 * PI).powi(q as i32);
            let (s, c) = (a + q as f64 * PI / 2.0).sin_cos();
            [w * c, w * s, 0.0]
        });
        let fd: FrenetData<f64> = evaluate_frenet(&circle, 2049).unwrap();
        assert!(filter_value(&fd, 0.0) < 1e-10);
        for w in [0.3, 1.0, 17.0] {
            assert!((filter_value(&fd, w) - filter_value(&fd, -w)).abs() < 1e-12);
            assert!(filter_value(&fd, w) >= 0.0);
        }
    }
}
