//! Design of dynamically corrected single-qubit gates from Bézier space
//! curves.
//!
//! The pipeline runs control points → curve → Frenet frame → control pulses,
//! with the target gate fixed by boundary control points and total torsion
//! compensation, and free points tuned by Adam on forward-mode gradients.
//! The [`bench`] module verifies designs by direct propagation.
//!
//! Geometry is generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod barq;
pub mod bench;
pub mod bezier;
pub mod curve;
pub mod dual;
pub mod error;
pub mod frenet;
pub mod gatemap;
pub mod io;
pub mod linalg;
pub mod optimize;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Forward-mode dual number over `f64`.
pub type Dual64 = dual::Dual<f64>;

pub type Vector3 = linalg::Vec3<f64>;
pub type Matrix3 = linalg::Mat3<f64>;
pub type ControlPoints = bezier::ControlPointSet<f64>;
pub type Bezier = bezier::BezierCurve<f64>;
pub type Frenet = frenet::FrenetData<f64>;
pub type BarqParams = barq::BarqParameters<f64>;
