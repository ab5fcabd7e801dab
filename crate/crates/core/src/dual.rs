//! Forward-mode automatic differentiation via dual numbers.
//!
//! A dual number `re + eps·ε` with `ε² = 0` carries a value and its
//! directional derivative. Gradients of functions of several variables are
//! obtained by seeding one variable at a time (see
//! [`optimize::gradient`](crate::optimize::gradient)).
//!
//! Comparisons only look at the real part, so control flow taken on a dual
//! matches the control flow taken on its primal value.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, Sub, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

use crate::scalar::Scalar;

/// Dual number over a floating point base type.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dual<F> {
    /// Real (primal) part.
    pub re: F,
    /// Infinitesimal (tangent) part.
    pub eps: F,
}

impl<F: Float> Dual<F> {
    #[inline]
    pub fn new(re: F, eps: F) -> Self {
        Self { re, eps }
    }

    /// Constant with zero tangent.
    #[inline]
    pub fn constant(re: F) -> Self {
        Self { re, eps: F::zero() }
    }

    /// Independent variable with unit tangent.
    #[inline]
    pub fn variable(re: F) -> Self {
        Self { re, eps: F::one() }
    }

    /// Apply a scalar function given its value and first derivative at `re`.
    #[inline]
    fn chain(self, value: F, deriv: F) -> Self {
        Self { re: value, eps: self.eps * deriv }
    }
}

impl<F: Float> PartialEq for Dual<F> {
    fn eq(&self, other: &Self) -> bool {
        self.re == other.re
    }
}

impl<F: Float> PartialOrd for Dual<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.re.partial_cmp(&other.re)
    }
}

impl<F: Float + fmt::Display> fmt::Display for Dual<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}ε", self.re, self.eps)
    }
}

impl<F: Float> Add for Dual<F> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Self { re: self.re + rhs.re, eps: self.eps + rhs.eps }
    }
}

impl<F: Float> Sub for Dual<F> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Self { re: self.re - rhs.re, eps: self.eps - rhs.eps }
    }
}

impl<F: Float> Mul for Dual<F> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        Self { re: self.re * rhs.re, eps: self.eps * rhs.re + self.re * rhs.eps }
    }
}

impl<F: Float> Div for Dual<F> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = F::one() / rhs.re;
        let re = self.re * inv;
        Self { re, eps: (self.eps - re * rhs.eps) * inv }
    }
}

impl<F: Float> Rem for Dual<F> {
    type Output = Self;
    fn rem(self, rhs: Self) -> Self {
        // x mod y = x - y * trunc(x / y); trunc is locally constant.
        let q = (self.re / rhs.re).trunc();
        Self { re: self.re % rhs.re, eps: self.eps - rhs.eps * q }
    }
}

impl<F: Float> Neg for Dual<F> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { re: -self.re, eps: -self.eps }
    }
}

impl<F: Float> AddAssign for Dual<F> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<F: Float> SubAssign for Dual<F> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl<F: Float> MulAssign for Dual<F> {
    #[inline]
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl<F: Float> DivAssign for Dual<F> {
    #[inline]
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl<F: Float> Sum for Dual<F> {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<F: Float> Zero for Dual<F> {
    fn zero() -> Self {
        Self::constant(F::zero())
    }
    fn is_zero(&self) -> bool {
        self.re.is_zero()
    }
}

impl<F: Float> One for Dual<F> {
    fn one() -> Self {
        Self::constant(F::one())
    }
}

impl<F: Float> Num for Dual<F> {
    type FromStrRadixErr = F::FromStrRadixErr;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        F::from_str_radix(s, radix).map(Self::constant)
    }
}

impl<F: Float> ToPrimitive for Dual<F> {
    fn to_i64(&self) -> Option<i64> {
        self.re.to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.re.to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        self.re.to_f64()
    }
    fn to_f32(&self) -> Option<f32> {
        self.re.to_f32()
    }
}

impl<F: Float> NumCast for Dual<F> {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        F::from(n).map(Self::constant)
    }
}

impl<F: Float + FromPrimitive> FromPrimitive for Dual<F> {
    fn from_i64(n: i64) -> Option<Self> {
        F::from_i64(n).map(Self::constant)
    }
    fn from_u64(n: u64) -> Option<Self> {
        F::from_u64(n).map(Self::constant)
    }
    fn from_f64(n: f64) -> Option<Self> {
        F::from_f64(n).map(Self::constant)
    }
}

impl<F: Float + FloatConst> FloatConst for Dual<F> {
    fn E() -> Self {
        Self::constant(F::E())
    }
    fn FRAC_1_PI() -> Self {
        Self::constant(F::FRAC_1_PI())
    }
    fn FRAC_1_SQRT_2() -> Self {
        Self::constant(F::FRAC_1_SQRT_2())
    }
    fn FRAC_2_PI() -> Self {
        Self::constant(F::FRAC_2_PI())
    }
    fn FRAC_2_SQRT_PI() -> Self {
        Self::constant(F::FRAC_2_SQRT_PI())
    }
    fn FRAC_PI_2() -> Self {
        Self::constant(F::FRAC_PI_2())
    }
    fn FRAC_PI_3() -> Self {
        Self::constant(F::FRAC_PI_3())
    }
    fn FRAC_PI_4() -> Self {
        Self::constant(F::FRAC_PI_4())
    }
    fn FRAC_PI_6() -> Self {
        Self::constant(F::FRAC_PI_6())
    }
    fn FRAC_PI_8() -> Self {
        Self::constant(F::FRAC_PI_8())
    }
    fn LN_10() -> Self {
        Self::constant(F::LN_10())
    }
    fn LN_2() -> Self {
        Self::constant(F::LN_2())
    }
    fn LOG10_E() -> Self {
        Self::constant(F::LOG10_E())
    }
    fn LOG2_E() -> Self {
        Self::constant(F::LOG2_E())
    }
    fn PI() -> Self {
        Self::constant(F::PI())
    }
    fn SQRT_2() -> Self {
        Self::constant(F::SQRT_2())
    }
}

impl<F: Float> Float for Dual<F> {
    fn nan() -> Self {
        Self::constant(F::nan())
    }
    fn infinity() -> Self {
        Self::constant(F::infinity())
    }
    fn neg_infinity() -> Self {
        Self::constant(F::neg_infinity())
    }
    fn neg_zero() -> Self {
        Self::constant(F::neg_zero())
    }
    fn min_value() -> Self {
        Self::constant(F::min_value())
    }
    fn min_positive_value() -> Self {
        Self::constant(F::min_positive_value())
    }
    fn max_value() -> Self {
        Self::constant(F::max_value())
    }
    fn is_nan(self) -> bool {
        self.re.is_nan() || self.eps.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.re.is_infinite() || self.eps.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.eps.is_finite()
    }
    fn is_normal(self) -> bool {
        self.re.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.re.classify()
    }
    fn floor(self) -> Self {
        Self::constant(self.re.floor())
    }
    fn ceil(self) -> Self {
        Self::constant(self.re.ceil())
    }
    fn round(self) -> Self {
        Self::constant(self.re.round())
    }
    fn trunc(self) -> Self {
        Self::constant(self.re.trunc())
    }
    fn fract(self) -> Self {
        Self { re: self.re.fract(), eps: self.eps }
    }
    fn abs(self) -> Self {
        if self.re < F::zero() {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::constant(self.re.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.re.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.re.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        let inv = self.re.recip();
        self.chain(inv, -inv * inv)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let d = F::from(n).unwrap() * self.re.powi(n - 1);
        self.chain(self.re.powi(n), d)
    }
    fn powf(self, n: Self) -> Self {
        if n.eps.is_zero() {
            let e = n.re;
            if e.is_zero() {
                return Self::one();
            }
            return self.chain(self.re.powf(e), e * self.re.powf(e - F::one()));
        }
        (self.ln() * n).exp()
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        // Zero tangent at the origin stays zero rather than 0/0.
        if self.eps.is_zero() {
            return Self::constant(s);
        }
        Self { re: s, eps: self.eps / (s + s) }
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e)
    }
    fn exp2(self) -> Self {
        let e = self.re.exp2();
        self.chain(e, e * F::from(std::f64::consts::LN_2).unwrap())
    }
    fn ln(self) -> Self {
        self.chain(self.re.ln(), self.re.recip())
    }
    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }
    fn log2(self) -> Self {
        self.ln() / Self::constant(F::from(std::f64::consts::LN_2).unwrap())
    }
    fn log10(self) -> Self {
        self.ln() / Self::constant(F::from(std::f64::consts::LN_10).unwrap())
    }
    fn max(self, other: Self) -> Self {
        if self.re >= other.re || other.re.is_nan() {
            self
        } else {
            other
        }
    }
    fn min(self, other: Self) -> Self {
        if self.re <= other.re || other.re.is_nan() {
            self
        } else {
            other
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self.re > other.re {
            self - other
        } else {
            Self::zero()
        }
    }
    fn cbrt(self) -> Self {
        let c = self.re.cbrt();
        self.chain(c, F::one() / (F::from(3.0).unwrap() * c * c))
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(s, c)
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        self.chain(c, -s)
    }
    fn tan(self) -> Self {
        let t = self.re.tan();
        self.chain(t, F::one() + t * t)
    }
    fn asin(self) -> Self {
        self.chain(self.re.asin(), (F::one() - self.re * self.re).sqrt().recip())
    }
    fn acos(self) -> Self {
        self.chain(self.re.acos(), -(F::one() - self.re * self.re).sqrt().recip())
    }
    fn atan(self) -> Self {
        self.chain(self.re.atan(), (F::one() + self.re * self.re).recip())
    }
    fn atan2(self, other: Self) -> Self {
        let r2 = self.re * self.re + other.re * other.re;
        Self {
            re: self.re.atan2(other.re),
            eps: (other.re * self.eps - self.re * other.eps) / r2,
        }
    }
    fn sin_cos(self) -> (Self, Self) {
        let (s, c) = self.re.sin_cos();
        (self.chain(s, c), self.chain(c, -s))
    }
    fn exp_m1(self) -> Self {
        self.chain(self.re.exp_m1(), self.re.exp())
    }
    fn ln_1p(self) -> Self {
        self.chain(self.re.ln_1p(), (F::one() + self.re).recip())
    }
    fn sinh(self) -> Self {
        self.chain(self.re.sinh(), self.re.cosh())
    }
    fn cosh(self) -> Self {
        self.chain(self.re.cosh(), self.re.sinh())
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        self.chain(t, F::one() - t * t)
    }
    fn asinh(self) -> Self {
        self.chain(self.re.asinh(), (self.re * self.re + F::one()).sqrt().recip())
    }
    fn acosh(self) -> Self {
        self.chain(self.re.acosh(), (self.re * self.re - F::one()).sqrt().recip())
    }
    fn atanh(self) -> Self {
        self.chain(self.re.atanh(), (F::one() - self.re * self.re).recip())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.re.integer_decode()
    }
}

impl Scalar for Dual<f64> {
    #[inline]
    fn lit(v: f64) -> Self {
        Self::constant(v)
    }
    #[inline]
    fn primal(self) -> f64 {
        self.re
    }
}

impl Scalar for Dual<f32> {
    #[inline]
    fn lit(v: f64) -> Self {
        Self::constant(v as f32)
    }
    #[inline]
    fn primal(self) -> f64 {
        self.re as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type D = Dual<f64>;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn elementary_derivatives_match_finite_differences() {
        let x = 0.37;
        let cases: Vec<(Box<dyn Fn(D) -> D>, Box<dyn Fn(f64) -> f64>)> = vec![
            (Box::new(|v: D| v.sin() * v.exp()), Box::new(|v: f64| v.sin() * v.exp())),
            (Box::new(|v: D| v.sqrt() / (v + D::lit(2.0))), Box::new(|v: f64| v.sqrt() / (v + 2.0))),
            (Box::new(|v: D| v.powi(5) - v.ln()), Box::new(|v: f64| v.powi(5) - v.ln())),
            (Box::new(|v: D| v.atan2(D::lit(0.3) - v)), Box::new(|v: f64| v.atan2(0.3 - v))),
            (Box::new(|v: D| v.powf(D::lit(2.5)).cos()), Box::new(|v: f64| v.powf(2.5).cos())),
            (Box::new(|v: D| v.tanh() + v.acos()), Box::new(|v: f64| v.tanh() + v.acos())),
        ];
        for (fdual, fplain) in cases {
            let got = fdual(D::variable(x));
            assert!((got.re - fplain(x)).abs() < 1e-14);
            assert!((got.eps - fd(&fplain, x)).abs() < 1e-8, "{} vs {}", got.eps, fd(&fplain, x));
        }
    }

    #[test]
    fn sqrt_of_constant_zero_has_zero_tangent() {
        let z = D::constant(0.0).sqrt();
        assert_eq!(z.re, 0.0);
        assert_eq!(z.eps, 0.0);
    }

    #[test]
    fn comparisons_use_real_part() {
        assert!(D::new(1.0, 5.0) < D::new(2.0, -5.0));
        assert!(D::new(1.0, 5.0) == D::new(1.0, -5.0));
    }
}
