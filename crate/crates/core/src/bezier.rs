//! Bézier curves in the Bernstein basis.
//!
//! Derivatives are exact: the q-th derivative of a degree-n curve is the
//! degree-(n−q) curve whose control points are the q-th forward differences
//! scaled by n!/(n−q)!.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::curve::ParametricCurve;
use crate::error::{Error, Result};
use crate::linalg::Vec3;
use crate::scalar::Scalar;

/// Largest supported curve degree.
pub const MAX_DEGREE: usize = 64;

/// Bernstein weights g_{j,n}(x), j = 0..=n, via the de Casteljau recurrence.
pub fn bernstein_basis<T: Scalar>(n: usize, x: T) -> Result<Vec<T>> {
    let xp = x.primal();
    if !(0.0..=1.0).contains(&xp) {
        return Err(Error::Domain(format!("Bernstein parameter x = {xp} outside [0, 1]")));
    }
    if n > MAX_DEGREE {
        return Err(Error::Domain(format!("degree {n} exceeds the supported maximum {MAX_DEGREE}")));
    }
    Ok(bernstein_unchecked(n, x))
}

fn bernstein_unchecked<T: Scalar>(n: usize, x: T) -> Vec<T> {
    let u = T::one() - x;
    let mut b = vec![T::zero(); n + 1];
    b[0] = T::one();
    for k in 1..=n {
        for j in (1..=k).rev() {
            b[j] = u * b[j] + x * b[j - 1];
        }
        b[0] = u * b[0];
    }
    b
}

/// q-th forward differences Δ^q w_j and the factor n!/(n−q)!.
pub fn diff_control_points<T: Scalar>(points: &[Vec3<T>], q: usize) -> Result<(Vec<Vec3<T>>, u128)> {
    if points.is_empty() {
        return Err(Error::Domain("empty control point list".into()));
    }
    let n = points.len() - 1;
    if q > n {
        return Err(Error::Domain(format!("derivative order {q} exceeds degree {n}")));
    }
    let mut factor: u128 = 1;
    for k in 0..q {
        factor = factor
            .checked_mul((n - k) as u128)
            .ok_or_else(|| Error::Domain(format!("scale factor {n}!/({n}-{q})! overflows")))?;
    }
    let mut d = points.to_vec();
    for _ in 0..q {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok((d, factor))
}

/// Curve value and derivatives at one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample<T> {
    pub x: T,
    pub value: Vec3<T>,
    /// `derivatives[q - 1]` holds d^q r/dx^q.
    pub derivatives: Vec<Vec3<T>>,
}

fn weighted_sum<T: Scalar>(points: &[Vec3<T>], w: &[T]) -> Vec3<T> {
    points.iter().zip(w).fold(Vec3::zero(), |acc, (p, &g)| acc + p.scale(g))
}

/// Evaluate r(x) and its first `max_order` derivatives.
pub fn bezier_eval<T: Scalar>(points: &[Vec3<T>], x: T, max_order: usize) -> Result<CurveSample<T>> {
    if points.is_empty() {
        return Err(Error::Domain("empty control point list".into()));
    }
    let n = points.len() - 1;
    if max_order > n {
        return Err(Error::Domain(format!("derivative order {max_order} exceeds degree {n}")));
    }
    let value = weighted_sum(points, &bernstein_basis(n, x)?);
    let xp = x.primal();
    // Endpoints are reproduced exactly rather than through the weight sum.
    let value = if xp == 0.0 {
        points[0]
    } else if xp == 1.0 {
        points[n]
    } else {
        value
    };
    let mut derivatives = Vec::with_capacity(max_order);
    let mut d = points.to_vec();
    let mut scale = T::one();
    for q in 1..=max_order {
        scale = scale * T::lit((n - q + 1) as f64);
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
        let g = bernstein_unchecked(n - q, x);
        derivatives.push(weighted_sum(&d, &g).scale(scale));
    }
    Ok(CurveSample { x, value, derivatives })
}

/// Validated control points w_0..w_n of a Bézier curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointSet<T> {
    points: Vec<Vec3<T>>,
}

impl<T: Scalar> ControlPointSet<T> {
    pub fn new(points: Vec<Vec3<T>>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::Domain(format!(
                "a control point set needs at least 4 points (degree 3), got {}",
                points.len()
            )));
        }
        if points.len() - 1 > MAX_DEGREE {
            return Err(Error::Domain(format!(
                "degree {} exceeds the supported maximum {MAX_DEGREE}",
                points.len() - 1
            )));
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::Domain(format!("control point {i} has a non-finite coordinate")));
        }
        Ok(Self { points })
    }

    pub fn from_f64(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|&p| Vec3::from_f64(p)).collect())
    }

    pub fn degree(&self) -> usize {
        self.points.len() - 1
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec3<T>> {
        self.points
    }

    pub fn to_f64(&self) -> Vec<[f64; 3]> {
        self.points.iter().map(|p| p.to_f64()).collect()
    }
}

type BasisTable = Arc<Vec<f64>>;

/// Bernstein tables on uniform grids, shared across curves and threads.
fn basis_table(degree: usize, k: usize) -> BasisTable {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), BasisTable>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&(degree, k)) {
        return t.clone();
    }
    let h = 1.0 / (k - 1) as f64;
    let mut table = Vec::with_capacity(k * (degree + 1));
    for i in 0..k {
        let x = if i + 1 == k { 1.0 } else { i as f64 * h };
        table.extend(bernstein_unchecked(degree, x));
    }
    let table = Arc::new(table);
    cache.lock().unwrap().insert((degree, k), table.clone());
    table
}

/// Bézier curve with all derivative control polygons precomputed.
#[derive(Debug, Clone)]
pub struct BezierCurve<T> {
    points: ControlPointSet<T>,
    /// `hodographs[q]`: control points of d^q r/dx^q, already scaled.
    hodographs: Vec<Vec<Vec3<T>>>,
}

impl<T: Scalar> BezierCurve<T> {
    pub fn new(points: ControlPointSet<T>) -> Self {
        let n = points.degree();
        let mut hodographs = Vec::with_capacity(n + 1);
        hodographs.push(points.points().to_vec());
        for q in 1..=n {
            let s = T::lit((n - q + 1) as f64);
            let prev: &Vec<Vec3<T>> = &hodographs[q - 1];
            let next = prev.windows(2).map(|w| (w[1] - w[0]).scale(s)).collect();
            hodographs.push(next);
        }
        Self { points, hodographs }
    }

    pub fn control_points(&self) -> &ControlPointSet<T> {
        &self.points
    }

    pub fn degree(&self) -> usize {
        self.points.degree()
    }
}

impl<T: Scalar> ParametricCurve<T> for BezierCurve<T> {
    fn max_order(&self) -> usize {
        self.degree()
    }

    fn derivative(&self, x: f64, q: usize) -> Vec3<T> {
        let n = self.degree();
        if q > n {
            return Vec3::zero();
        }
        let pts = &self.hodographs[q];
        if x == 0.0 {
            return pts[0];
        }
        if x == 1.0 {
            return pts[n - q];
        }
        let g = bernstein_unchecked(n - q, x);
        pts.iter().zip(&g).fold(Vec3::zero(), |acc, (p, &w)| acc + p.scale(T::lit(w)))
    }

    fn grid_jets(&self, k: usize) -> Vec<[Vec3<T>; 4]> {
        let n = self.degree();
        let tables: Vec<Option<BasisTable>> =
            (0..4).map(|q| if q <= n { Some(basis_table(n - q, k)) } else { None }).collect();
        let mut out = Vec::with_capacity(k);
        for i in 0..k {
            let mut jet = [Vec3::zero(); 4];
            for (q, table) in tables.iter().enumerate() {
                let Some(table) = table else { continue };
                let m = n - q + 1;
                let pts = &self.hodographs[q];
                jet[q] = if i == 0 {
                    pts[0]
                } else if i + 1 == k {
                    pts[m - 1]
                } else {
                    let row = &table[i * m..(i + 1) * m];
                    pts.iter().zip(row).fold(Vec3::zero(), |acc, (p, &w)| acc + p.scale(T::lit(w)))
                };
            }
            out.push(jet);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(p: [f64; 3]) -> Vec3<f64> {
        Vec3::from_f64(p)
    }

    #[test]
    fn basis_small_cases() {
        assert_eq!(bernstein_basis(1, 0.0).unwrap(), vec![1.0, 0.0]);
        assert_eq!(bernstein_basis(2, 0.5).unwrap(), vec![0.25, 0.5, 0.25]);
        let s: f64 = bernstein_basis(7, 0.3).unwrap().iter().sum();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn basis_matches_binomial_formula() {
        let n = 9;
        let x = 0.37f64;
        let b = bernstein_basis(n, x).unwrap();
        let mut c = 1.0;
        for (j, bj) in b.iter().enumerate() {
            let expect = c * x.powi(j as i32) * (1.0 - x).powi((n - j) as i32);
            assert!((bj - expect).abs() < 1e-15);
            c = c * (n - j) as f64 / (j + 1) as f64;
        }
    }

    #[test]
    fn basis_rejects_out_of_range() {
        assert!(matches!(bernstein_basis(3, 1.5), Err(Error::Domain(_))));
        assert!(matches!(bernstein_basis(3, -0.1), Err(Error::Domain(_))));
        assert!(matches!(bernstein_basis(65, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn forward_differences() {
        let pts = [v([0.0, 0.0, 0.0]), v([1.0, 0.0, 0.0]), v([1.0, 1.0, 0.0])];
        let (d1, f1) = diff_control_points(&pts, 1).unwrap();
        assert_eq!(d1, vec![v([1.0, 0.0, 0.0]), v([0.0, 1.0, 0.0])]);
        assert_eq!(f1, 2);
        let (d2, f2) = diff_control_points(&pts, 2).unwrap();
        assert_eq!(d2, vec![v([-1.0, 1.0, 0.0])]);
        assert_eq!(f2, 2);
        let (d0, f0) = diff_control_points(&pts, 0).unwrap();
        assert_eq!(d0, pts.to_vec());
        assert_eq!(f0, 1);
        assert!(matches!(diff_control_points(&pts, 3), Err(Error::Domain(_))));
    }

    #[test]
    fn quadratic_midpoint() {
        let pts = [v([0.0, 0.0, 0.0]), v([1.0, 0.0, 0.0]), v([1.0, 1.0, 0.0])];
        let s = bezier_eval(&pts, 0.5, 2).unwrap();
        assert_eq!(s.value, v([0.75, 0.25, 0.0]));
    }

    #[test]
    fn zero_curve() {
        let pts = vec![Vec3::<f64>::zero(); 6];
        let s = bezier_eval(&pts, 0.7, 5).unwrap();
        assert_eq!(s.value, Vec3::zero());
        assert!(s.derivatives.iter().all(|d| *d == Vec3::zero()));
    }

    #[test]
    fn control_point_set_validation() {
        assert!(ControlPointSet::<f64>::from_f64(&[[0.0; 3]; 3]).is_err());
        assert!(ControlPointSet::<f64>::from_f64(&[[0.0; 3], [1.0, f64::NAN, 0.0], [0.0; 3], [0.0; 3]]).is_err());
        assert!(ControlPointSet::<f64>::from_f64(&[[0.0; 3]; 66]).is_err());
        assert_eq!(ControlPointSet::<f64>::from_f64(&[[0.0; 3]; 5]).unwrap().degree(), 4);
    }

    #[test]
    fn grid_jets_agree_with_pointwise_evaluation() {
        let pts: Vec<[f64; 3]> = (0..9).map(|i| [(i as f64).sin(), (i as f64 * 0.7).cos(), i as f64 * 0.1]).collect();
        let curve = BezierCurve::new(ControlPointSet::<f64>::from_f64(&pts).unwrap());
        let k = 33;
        let jets = curve.grid_jets(k);
        for (i, jet) in jets.iter().enumerate() {
            let x = i as f64 / (k - 1) as f64;
            let s = bezier_eval(&ControlPointSet::<f64>::from_f64(&pts).unwrap().into_points(), x, 3).unwrap();
            assert!((jet[0] - s.value).max_abs() < 1e-13);
            for q in 1..4 {
                assert!((jet[q] - s.derivatives[q - 1]).max_abs() < 1e-11);
            }
        }
    }

    fn points_strategy(min: usize, max: usize) -> impl Strategy<Value = Vec<[f64; 3]>> {
        prop::collection::vec(prop::array::uniform3(-2.0f64..2.0), min..=max)
    }

    proptest! {
        #[test]
        fn partition_of_unity(n in 0usize..=32, xs in prop::collection::vec(0.0f64..=1.0, 100)) {
            for x in xs {
                let s: f64 = bernstein_basis(n, x).unwrap().iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(bernstein_basis(n, x).unwrap().iter().all(|&w| w >= 0.0));
            }
        }

        #[test]
        fn derivatives_match_finite_differences(pts in points_strategy(5, 9), x in 0.05f64..0.95) {
            let pts: Vec<Vec3<f64>> = pts.into_iter().map(Vec3::from_f64).collect();
            let h = 1e-5;
            let s = bezier_eval(&pts, x, 4).unwrap();
            let lo = bezier_eval(&pts, x - h, 4).unwrap();
            let hi = bezier_eval(&pts, x + h, 4).unwrap();
            for q in 1..=3 {
                let prev = |c: &CurveSample<f64>| if q == 1 { c.value } else { c.derivatives[q - 2] };
                let fd = (prev(&hi) - prev(&lo)).scale(0.5 / h);
                let exact = s.derivatives[q - 1];
                let scale = exact.norm().max(s.derivatives[q].norm() * h).max(1e-3);
                prop_assert!((fd - exact).norm() / scale < 1e-6, "q={} fd={:?} exact={:?}", q, fd, exact);
            }
        }

        #[test]
        fn endpoint_identities(pts in points_strategy(4, 16)) {
            let w: Vec<Vec3<f64>> = pts.into_iter().map(Vec3::from_f64).collect();
            let n = w.len() - 1;
            let nf = n as f64;
            let a = bezier_eval(&w, 0.0, 3).unwrap();
            let b = bezier_eval(&w, 1.0, 3).unwrap();
            prop_assert_eq!(a.value, w[0]);
            prop_assert_eq!(b.value, w[n]);
            let tol = 1e-12 * nf.powi(3);
            prop_assert!((a.derivatives[0] - (w[1] - w[0]).scale(nf)).max_abs() < tol);
            prop_assert!((a.derivatives[1] - (w[2] - w[1].scale(2.0) + w[0]).scale(nf * (nf - 1.0))).max_abs() < tol);
            let d3 = w[3] - w[2].scale(3.0) + w[1].scale(3.0) - w[0];
            prop_assert!((a.derivatives[2] - d3.scale(nf * (nf - 1.0) * (nf - 2.0))).max_abs() < tol);
            prop_assert!((b.derivatives[0] - (w[n] - w[n - 1]).scale(nf)).max_abs() < tol);
            prop_assert!((b.derivatives[1] - (w[n] - w[n - 1].scale(2.0) + w[n - 2]).scale(nf * (nf - 1.0))).max_abs() < tol);
            let e3 = w[n] - w[n - 1].scale(3.0) + w[n - 2].scale(3.0) - w[n - 3];
            prop_assert!((b.derivatives[2] - e3.scale(nf * (nf - 1.0) * (nf - 2.0))).max_abs() < tol);
        }

        #[test]
        fn affine_translation(pts in points_strategy(4, 12), shift in prop::array::uniform3(-5.0f64..5.0), x in 0.0f64..=1.0) {
            let w: Vec<Vec3<f64>> = pts.into_iter().map(Vec3::from_f64).collect();
            let s = Vec3::from_f64(shift);
            let moved: Vec<Vec3<f64>> = w.iter().map(|&p| p + s).collect();
            let a = bezier_eval(&w, x, 0).unwrap().value + s;
            let b = bezier_eval(&moved, x, 0).unwrap().value;
            prop_assert!((a - b).max_abs() < 1e-12);
        }
    }
}
