//! Parametric curves on x ∈ [0, 1] that expose derivatives of any order.

use crate::linalg::Vec3;
use crate::scalar::Scalar;

/// A curve r(x), x ∈ [0, 1], with exact derivatives.
pub trait ParametricCurve<T: Scalar>: Sync {
    /// Highest derivative order that may be nonzero. Orders above this are
    /// treated as identically zero.
    fn max_order(&self) -> usize;

    /// d^q r / dx^q at `x`; q = 0 is the position.
    fn derivative(&self, x: f64, q: usize) -> Vec3<T>;

    /// Position and first three derivatives on the uniform grid
    /// x_i = i / (k - 1).
    fn grid_jets(&self, k: usize) -> Vec<[Vec3<T>; 4]> {
        let h = 1.0 / (k - 1) as f64;
        (0..k)
            .map(|i| {
                let x = if i + 1 == k { 1.0 } else { i as f64 * h };
                [self.derivative(x, 0), self.derivative(x, 1), self.derivative(x, 2), self.derivative(x, 3)]
            })
            .collect()
    }
}

/// Curve given by a closure `f(x, q) -> d^q r/dx^q`.
pub struct FnCurve<F> {
    f: F,
    max_order: usize,
}

impl<F> FnCurve<F>
where
    F: Fn(f64, usize) -> [f64; 3] + Sync,
{
    pub fn new(max_order: usize, f: F) -> Self {
        Self { f, max_order }
    }
}

impl<T, F> ParametricCurve<T> for FnCurve<F>
where
    T: Scalar,
    F: Fn(f64, usize) -> [f64; 3] + Sync,
{
    fn max_order(&self) -> usize {
        self.max_order
    }

    fn derivative(&self, x: f64, q: usize) -> Vec3<T> {
        Vec3::from_f64((self.f)(x, q))
    }
}
