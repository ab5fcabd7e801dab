//! Continuous Frenet-Serret frame of a regular space curve.
//!
//! The curve is sampled on a uniform grid in its parameter x. Arclength is
//! time. Curvature is signed: a switching function f = ±1 flips at every
//! singular inflection point so that N and B stay continuous through it.
//! Flips are found by a direction test on the unit vector along r′×r″
//! between neighbouring samples.

use serde::{Deserialize, Serialize};

use crate::curve::ParametricCurve;
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::Scalar;

pub const DEFAULT_GRID: usize = 2049;
pub const OPTIMIZATION_GRID: usize = 513;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetOptions {
    pub grid_size: usize,
    /// Minimum speed, relative to the mean speed over the grid.
    pub regularity_eps: f64,
    /// Inflection threshold on ‖r′×r″‖/γ², relative to its grid maximum.
    pub inflection_eps: f64,
    /// Sine of the angle between r′ and a higher derivative below which the
    /// two are treated as parallel when resolving an inflection.
    pub order_eps: f64,
}

impl Default for FrenetOptions {
    fn default() -> Self {
        Self { grid_size: DEFAULT_GRID, regularity_eps: 1e-9, inflection_eps: 1e-8, order_eps: 1e-8 }
    }
}

impl FrenetOptions {
    pub fn with_grid(grid_size: usize) -> Self {
        Self { grid_size, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FrenetSample<T> {
    pub x: f64,
    /// Arclength, i.e. time.
    pub t: T,
    pub position: Vec3<T>,
    pub tangent: Vec3<T>,
    pub normal: Vec3<T>,
    pub binormal: Vec3<T>,
    /// Signed curvature.
    pub kappa: T,
    pub tau: T,
    /// Speed ‖dr/dx‖.
    pub gamma: T,
    /// Switching function value, ±1.
    pub switching: i8,
    /// (r′×r″)/γ², the x-space integrand of the tangent area ∫T×Ṫ dt.
    pub area_density: Vec3<T>,
}

/// A point where the curvature vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inflection {
    pub x: f64,
    pub t: f64,
    /// Lowest q ≥ 1 with r′ × d^{q+2}r/dx^{q+2} ≠ 0.
    pub order: Option<usize>,
    /// The turning direction reverses here and the curvature changes sign.
    pub singular: bool,
    /// At x = 0 or x = 1; resolved by one-sided limits, never singular.
    pub boundary: bool,
}

#[derive(Debug, Clone)]
pub struct FrenetData<T> {
    pub samples: Vec<FrenetSample<T>>,
    pub total_length: T,
    pub total_torsion: T,
    pub inflections: Vec<Inflection>,
}

#[derive(Debug, Clone, Copy)]
pub struct RobustnessMeasures<T> {
    /// ‖r(T_g) − r(0)‖.
    pub closure_gap: T,
    /// ∫ T×Ṫ dt.
    pub tangent_area: Vec3<T>,
    pub cfi: T,
}

impl<T: Scalar> FrenetData<T> {
    /// Number of singular points M.
    pub fn singular_count(&self) -> usize {
        self.inflections.iter().filter(|p| p.singular).count()
    }

    /// Times t_s of the singular points, ascending.
    pub fn singular_times(&self) -> Vec<f64> {
        self.inflections.iter().filter(|p| p.singular).map(|p| p.t).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.samples.len() - 1) as f64
    }

    /// Trapezoid estimate of ∫ T×Ṫ dt over samples `lo..=hi`.
    pub fn tangent_area_between(&self, lo: usize, hi: usize) -> Vec3<T> {
        let h = T::lit(self.step() * 0.5);
        let mut acc = Vec3::zero();
        for w in self.samples[lo..=hi].windows(2) {
            acc += (w[0].area_density + w[1].area_density).scale(h);
        }
        acc
    }

    pub fn tangent_area(&self) -> Vec3<T> {
        self.tangent_area_between(0, self.samples.len() - 1)
    }

    /// (1/T_g³) ∫ ‖r − r(0)‖² dt.
    pub fn cfi(&self) -> T {
        let r0 = self.samples[0].position;
        let h = T::lit(self.step() * 0.5);
        let f = |s: &FrenetSample<T>| (s.position - r0).norm_sq() * s.gamma;
        let integral: T = self.samples.windows(2).map(|w| (f(&w[0]) + f(&w[1])) * h).sum();
        integral / self.total_length.powi(3)
    }

    pub fn closure_gap(&self) -> T {
        (self.samples[self.samples.len() - 1].position - self.samples[0].position).norm()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t.primal()).collect()
    }

    /// Primal copy, dropping any derivative information.
    pub fn to_f64(&self) -> FrenetData<f64> {
        let v = |p: Vec3<T>| Vec3::from_f64(p.to_f64());
        FrenetData {
            samples: self
                .samples
                .iter()
                .map(|s| FrenetSample {
                    x: s.x,
                    t: s.t.primal(),
                    position: v(s.position),
                    tangent: v(s.tangent),
                    normal: v(s.normal),
                    binormal: v(s.binormal),
                    kappa: s.kappa.primal(),
                    tau: s.tau.primal(),
                    gamma: s.gamma.primal(),
                    switching: s.switching,
                    area_density: v(s.area_density),
                })
                .collect(),
            total_length: self.total_length.primal(),
            total_torsion: self.total_torsion.primal(),
            inflections: self.inflections.clone(),
        }
    }
}

/// Unit binormal direction and torsion at an inflection, from the lowest
/// derivative order whose cross product with r′ does not vanish.
fn resolve_inflection<T: Scalar, C: ParametricCurve<T> + ?Sized>(
    curve: &C,
    x: f64,
    d1: Vec3<T>,
    gamma: f64,
    eps: f64,
) -> Result<(usize, Vec3<T>, T)> {
    let top = curve.max_order();
    for q in 1..=top.saturating_sub(2) {
        let dq = curve.derivative(x, q + 2);
        let dn = dq.norm().primal();
        if dn == 0.0 {
            continue;
        }
        let c = d1.cross(dq);
        let cn = c.norm();
        if cn.primal() > eps * gamma * dn {
            let next = curve.derivative(x, q + 3);
            let tau = c.dot(next) / (cn * cn) / T::lit((q + 1) as f64);
            return Ok((q, c.scale(cn.recip()), tau));
        }
    }
    Err(Error::FrameUndefined(format!(
        "all derivatives up to order {top} are parallel to the tangent at x = {x}"
    )))
}

/// Locate the sign change of c(x)·b between two samples by bisection.
fn bisect_flip<T: Scalar, C: ParametricCurve<T> + ?Sized>(curve: &C, lo: f64, hi: f64, b: [f64; 3]) -> f64 {
    let g = |x: f64| {
        let c = curve.derivative(x, 1).cross(curve.derivative(x, 2)).to_f64();
        c[0] * b[0] + c[1] * b[1] + c[2] * b[2]
    };
    let (mut a, mut z) = (lo, hi);
    for _ in 0..60 {
        let m = 0.5 * (a + z);
        if m <= a || m >= z {
            break;
        }
        if g(m) > 0.0 {
            a = m;
        } else {
            z = m;
        }
    }
    0.5 * (a + z)
}

/// Frenet frame on the default 2049-sample grid.
/// Running integral of samples `f` on a uniform grid of step `h`, exact
/// for cubics: each panel uses the cubic through its four nearest samples.
/// Fewer than four samples fall back to the trapezoid rule.
pub fn cumulative_integral<T: Scalar>(f: &[T], h: f64) -> Vec<T> {
    let k = f.len();
    let mut out = Vec::with_capacity(k);
    if k == 0 {
        return out;
    }
    out.push(T::zero());
    let c = |a: f64, b: f64, cc: f64, d: f64, i: usize| {
        (f[i] * T::lit(a) + f[i + 1] * T::lit(b) + f[i + 2] * T::lit(cc) + f[i + 3] * T::lit(d)) * T::lit(h / 24.0)
    };
    for i in 0..k.saturating_sub(1) {
        let panel = if k < 4 {
            (f[i] + f[i + 1]) * T::lit(0.5 * h)
        } else if i == 0 {
            c(9.0, 19.0, -5.0, 1.0, 0)
        } else if i + 2 == k {
            c(1.0, -5.0, 19.0, 9.0, k - 4)
        } else {
            c(-1.0, 13.0, 13.0, -1.0, i - 1)
        };
        out.push(out[i] + panel);
    }
    out
}

pub fn evaluate_frenet<T: Scalar, C: ParametricCurve<T> + ?Sized>(curve: &C, grid_size: usize) -> Result<FrenetData<T>> {
    evaluate_frenet_with(curve, &FrenetOptions::with_grid(grid_size))
}

pub fn evaluate_frenet_with<T: Scalar, C: ParametricCurve<T> + ?Sized>(
    curve: &C,
    opts: &FrenetOptions,
) -> Result<FrenetData<T>> {
    let k = opts.grid_size;
    if k < 3 {
        return Err(Error::Domain(format!("grid_size must be at least 3, got {k}")));
    }
    let h = 1.0 / (k - 1) as f64;
    let xs: Vec<f64> = (0..k).map(|i| if i + 1 == k { 1.0 } else { i as f64 * h }).collect();
    let jets = curve.grid_jets(k);
    if jets.iter().any(|j| j.iter().any(|v| !v.is_finite())) {
        return Err(Error::Evaluation("curve derivatives are not finite".into()));
    }

    let gammas: Vec<T> = jets.iter().map(|j| j[1].norm()).collect();
    let mean_gamma = gammas.iter().map(|g| g.primal()).sum::<f64>() / k as f64;
    if let Some(i) = gammas.iter().position(|g| g.primal() <= opts.regularity_eps * mean_gamma) {
        return Err(Error::Regularity(format!(
            "speed {:.3e} at x = {} is below {:.1e} × mean speed",
            gammas[i].primal(),
            xs[i],
            opts.regularity_eps
        )));
    }

    let cross: Vec<Vec3<T>> = jets.iter().map(|j| j[1].cross(j[2])).collect();
    let measure: Vec<f64> =
        cross.iter().zip(&gammas).map(|(c, g)| c.norm().primal() / g.primal().powi(2)).collect();
    let threshold = opts.inflection_eps * measure.iter().cloned().fold(0.0, f64::max);

    // Unsigned unit binormal, torsion, unsigned curvature and inflection order.
    let mut bhat = Vec::with_capacity(k);
    let mut tau = Vec::with_capacity(k);
    let mut kappa_u = Vec::with_capacity(k);
    let mut order: Vec<Option<usize>> = vec![None; k];
    for i in 0..k {
        let (c, g) = (cross[i], gammas[i]);
        if measure[i] > threshold {
            let cn = c.norm();
            bhat.push(c.scale(cn.recip()));
            tau.push(c.dot(jets[i][3]) / (cn * cn));
            kappa_u.push(cn / (g * g * g));
        } else {
            let (q, b, t) = resolve_inflection(curve, xs[i], jets[i][1], g.primal(), opts.order_eps)?;
            order[i] = Some(q);
            // Left limit at the final sample.
            let b = if i + 1 == k && q % 2 == 1 { -b } else { b };
            bhat.push(b);
            tau.push(t);
            kappa_u.push(T::zero());
        }
    }

    let ts = cumulative_integral(&gammas, h);
    let torsion_density: Vec<T> = tau.iter().zip(&gammas).map(|(&a, &g)| a * g).collect();
    let total_torsion = *cumulative_integral(&torsion_density, h).last().unwrap();
    let total_length = ts[k - 1];
    let t_at = |i: usize| ts[i].primal();

    let mut inflections = Vec::new();
    let mut f: i8 = 1;
    let mut switching = Vec::with_capacity(k);
    switching.push(1i8);
    if let Some(q) = order[0] {
        inflections.push(Inflection { x: 0.0, t: 0.0, order: Some(q), singular: false, boundary: true });
    }
    for i in 1..k {
        let flipped = bhat[i].dot(bhat[i - 1]).primal() < 0.0;
        if flipped {
            f = -f;
        }
        let boundary = i + 1 == k;
        match order[i] {
            Some(q) => inflections.push(Inflection {
                x: xs[i],
                t: t_at(i),
                order: Some(q),
                singular: flipped && !boundary,
                boundary,
            }),
            None if flipped => {
                let xs_ = bisect_flip(curve, xs[i - 1], xs[i], bhat[i - 1].to_f64());
                let frac = (xs_ - xs[i - 1]) / h;
                let t_s = t_at(i - 1) + frac * (t_at(i) - t_at(i - 1));
                let d1 = curve.derivative(xs_, 1);
                let q = resolve_inflection(curve, xs_, d1, d1.norm().primal(), 1e-6).ok().map(|r| r.0);
                inflections.push(Inflection { x: xs_, t: t_s, order: q, singular: true, boundary: false });
            }
            None => {}
        }
        switching.push(f);
    }

    let samples = (0..k)
        .map(|i| {
            let g = gammas[i];
            let tangent = jets[i][1].scale(g.recip());
            let sign = T::lit(switching[i] as f64);
            let binormal = bhat[i].scale(sign);
            FrenetSample {
                x: xs[i],
                t: ts[i],
                position: jets[i][0],
                tangent,
                normal: binormal.cross(tangent),
                binormal,
                kappa: kappa_u[i] * sign,
                tau: tau[i],
                gamma: g,
                switching: switching[i],
                area_density: cross[i].scale((g * g).recip()),
            }
        })
        .collect();

    Ok(FrenetData { samples, total_length, total_torsion, inflections })
}

/// Inflection points found during frame evaluation.
pub fn classify_inflections<T: Scalar>(fd: &FrenetData<T>) -> Vec<Inflection> {
    fd.inflections.clone()
}

pub fn robustness_measures<T: Scalar>(fd: &FrenetData<T>) -> RobustnessMeasures<T> {
    RobustnessMeasures { closure_gap: fd.closure_gap(), tangent_area: fd.tangent_area(), cfi: fd.cfi() }
}
