//! Scalar abstraction shared by every geometric routine.
//!
//! Curves, frames and losses are written once against [`Scalar`] and run
//! with `f64` for evaluation, `f32` where precision is not critical, and
//! [`Dual`](crate::dual::Dual) for forward-mode gradients.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable throughout the curve pipeline.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Lift an `f64` constant into this scalar type.
    fn lit(v: f64) -> Self;

    /// Primal value, used for branching, thresholds and reporting.
    fn primal(self) -> f64;
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn primal(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn primal(self) -> f64 {
        self as f64
    }
}
