//! Gate-fixing control points.
//!
//! A degree n = N + 5 curve is assembled from N free points p₁..p_N:
//! w₀ = w_n = 0 closes the curve, w₁, w₂ ∥ p̂₁ and w_{n−1}, w_{n−2} ∥ a₃
//! make both endpoints inflections (vanishing envelope), and w₃, w_{n−3}
//! orient the end frames so that R_B(T_g) = R_Zᵀ(θ_B) R_g R_B(0), where a_i
//! are the rows of R_g R_B(0). Points p₃..p_N fill the middle verbatim.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bezier::ControlPointSet;
use crate::error::{Error, Result};
use crate::gatemap::GateTarget;
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Scalar;

/// The λ scale parameters of the boundary control points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LambdaKey {
    L1Plus,
    L2,
    L3Plus,
    L3,
    Nm3Plus,
    Nm3,
    Nm2,
    Nm1Plus,
}

impl LambdaKey {
    pub const ALL: [LambdaKey; 8] = [
        LambdaKey::L1Plus,
        LambdaKey::L2,
        LambdaKey::L3Plus,
        LambdaKey::L3,
        LambdaKey::Nm3Plus,
        LambdaKey::Nm3,
        LambdaKey::Nm2,
        LambdaKey::Nm1Plus,
    ];

    /// Must stay strictly positive.
    pub fn is_positive(self) -> bool {
        matches!(self, LambdaKey::L1Plus | LambdaKey::L3Plus | LambdaKey::Nm3Plus | LambdaKey::Nm1Plus)
    }

    pub fn name(self) -> &'static str {
        match self {
            LambdaKey::L1Plus => "lambda_1+",
            LambdaKey::L2 => "lambda_2",
            LambdaKey::L3Plus => "lambda_3+",
            LambdaKey::L3 => "lambda_3",
            LambdaKey::Nm3Plus => "lambda_n-3+",
            LambdaKey::Nm3 => "lambda_n-3",
            LambdaKey::Nm2 => "lambda_n-2",
            LambdaKey::Nm1Plus => "lambda_n-1+",
        }
    }
}

impl fmt::Display for LambdaKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LambdaKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        LambdaKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Configuration(format!("lambda_overrides: unknown key '{s}'")))
    }
}

impl Serialize for LambdaKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for LambdaKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Value of one λ: fixed, or optimized starting from `init`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSetting {
    Fixed(f64),
    Optimizable { init: f64 },
}

impl Serialize for LambdaSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            LambdaSetting::Fixed(v) => s.serialize_f64(v),
            LambdaSetting::Optimizable { init } => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("optimizable", &init)?;
                m.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for LambdaSetting {
    /// Accepts a number, the string "optimizable", or {"optimizable": init}.
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
            Init { optimizable: f64 },
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(LambdaSetting::Fixed(v)),
            Raw::Tag(s) if s == "optimizable" => Ok(LambdaSetting::Optimizable { init: f64::NAN }),
            Raw::Tag(s) => Err(serde::de::Error::custom(format!("expected a number or \"optimizable\", got \"{s}\""))),
            Raw::Init { optimizable } => Ok(LambdaSetting::Optimizable { init: optimizable }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PgfKind {
    /// All endpoint scales fixed to ν; λ₃ = λ_{n−3} optimizable and tied.
    Symmetric,
    /// Every λ optimizable and independent, starting from the symmetric values.
    General,
}

impl std::str::FromStr for PgfKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" => Ok(Self::Symmetric),
            "general" => Ok(Self::General),
            other => Err(Error::Configuration(format!("pgf: unknown kind '{other}' (expected symmetric or general)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BarqConfig {
    pub target: GateTarget,
    pub n_free: usize,
    pub theta_b: f64,
    pub nu: f64,
    pub pgf: PgfKind,
    pub overrides: BTreeMap<LambdaKey, LambdaSetting>,
    /// λ₃ follows λ_{n−3}.
    pub tie_lambda3: bool,
    /// Append θ_B to the parameter vector.
    pub optimize_theta_b: bool,
}

/// Where a λ value comes from once defaults and overrides are merged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSource {
    Fixed(f64),
    /// Index into the optimizable raw vector.
    Slot(usize),
}

impl BarqConfig {
    pub fn new(target: GateTarget, n_free: usize, nu: f64) -> Self {
        Self {
            target,
            n_free,
            theta_b: 0.0,
            nu,
            pgf: PgfKind::Symmetric,
            overrides: BTreeMap::new(),
            tie_lambda3: true,
            optimize_theta_b: false,
        }
    }

    pub fn general(mut self) -> Self {
        self.pgf = PgfKind::General;
        self.tie_lambda3 = false;
        self
    }

    fn default_setting(&self, key: LambdaKey) -> LambdaSetting {
        let init = match key {
            LambdaKey::L3 | LambdaKey::Nm3 => 0.0,
            _ => self.nu,
        };
        match (self.pgf, key) {
            (PgfKind::General, _) | (_, LambdaKey::L3 | LambdaKey::Nm3) => LambdaSetting::Optimizable { init },
            _ => LambdaSetting::Fixed(init),
        }
    }

    /// Setting for `key` after overrides; optimizable entries without an
    /// explicit start take the default value.
    pub fn setting(&self, key: LambdaKey) -> LambdaSetting {
        let default = self.default_setting(key);
        match self.overrides.get(&key) {
            None => default,
            Some(LambdaSetting::Optimizable { init }) if init.is_nan() => {
                let init = match default {
                    LambdaSetting::Fixed(v) => v,
                    LambdaSetting::Optimizable { init } => init,
                };
                LambdaSetting::Optimizable { init }
            }
            Some(s) => *s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_free < 4 {
            return Err(Error::Configuration(format!("n_free: need at least 4 free points, got {}", self.n_free)));
        }
        if self.n_free + 5 > crate::bezier::MAX_DEGREE {
            return Err(Error::Configuration(format!("n_free: {} gives a degree above the maximum", self.n_free)));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Configuration(format!("nu: must be positive and finite, got {}", self.nu)));
        }
        if !self.theta_b.is_finite() {
            return Err(Error::Configuration("theta_B: must be finite".into()));
        }
        if self.tie_lambda3 && self.overrides.contains_key(&LambdaKey::L3) {
            return Err(Error::Configuration(
                "lambda_overrides: lambda_3 is tied to lambda_n-3; override lambda_n-3 instead".into(),
            ));
        }
        for key in LambdaKey::ALL {
            let v = match self.setting(key) {
                LambdaSetting::Fixed(v) => v,
                LambdaSetting::Optimizable { init } => init,
            };
            if !v.is_finite() || (key.is_positive() && v <= 0.0) {
                return Err(Error::Configuration(format!(
                    "lambda_overrides: {key} = {v} (must be finite{})",
                    if key.is_positive() { " and positive" } else { "" }
                )));
            }
        }
        Ok(())
    }

    /// Source of every λ, in [`LambdaKey::ALL`] order, and the number of slots.
    pub fn lambda_layout(&self) -> ([LambdaSource; 8], usize) {
        let mut out = [LambdaSource::Fixed(0.0); 8];
        let mut slots = 0;
        for (i, key) in LambdaKey::ALL.into_iter().enumerate() {
            if key == LambdaKey::L3 && self.tie_lambda3 {
                continue;
            }
            out[i] = match self.setting(key) {
                LambdaSetting::Fixed(v) => LambdaSource::Fixed(v),
                LambdaSetting::Optimizable { .. } => {
                    slots += 1;
                    LambdaSource::Slot(slots - 1)
                }
            };
        }
        if self.tie_lambda3 {
            out[3] = out[5];
        }
        (out, slots)
    }

    /// Length of the flat parameter vector.
    pub fn n_params(&self) -> usize {
        3 * self.n_free + self.lambda_layout().1 + usize::from(self.optimize_theta_b)
    }

    pub fn degree(&self) -> usize {
        self.n_free + 5
    }
}

/// Optimization variables of a BARQ curve.
#[derive(Debug, Clone, PartialEq)]
pub struct BarqParameters<T> {
    pub free_points: Vec<Vec3<T>>,
    /// Unconstrained λ values; positive λ are stored as logarithms.
    pub lambda_raw: Vec<T>,
    pub theta_b: Option<T>,
}

impl<T: Scalar> BarqParameters<T> {
    pub fn from_vector(cfg: &BarqConfig, v: &[T]) -> Result<Self> {
        let np = cfg.n_params();
        if v.len() != np {
            return Err(Error::Configuration(format!("parameter vector has length {}, expected {np}", v.len())));
        }
        let n3 = 3 * cfg.n_free;
        let free_points = v[..n3].chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        let slots = cfg.lambda_layout().1;
        let lambda_raw = v[n3..n3 + slots].to_vec();
        let theta_b = cfg.optimize_theta_b.then(|| v[n3 + slots]);
        Ok(Self { free_points, lambda_raw, theta_b })
    }

    pub fn to_vector(&self) -> Vec<T> {
        let mut v: Vec<T> = self.free_points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        v.extend(&self.lambda_raw);
        v.extend(self.theta_b);
        v
    }

    /// Constrained λ values in [`LambdaKey::ALL`] order.
    pub fn lambdas(&self, cfg: &BarqConfig) -> [T; 8] {
        let (layout, _) = cfg.lambda_layout();
        let mut out = [T::zero(); 8];
        for (i, key) in LambdaKey::ALL.into_iter().enumerate() {
            out[i] = match layout[i] {
                LambdaSource::Fixed(v) => T::lit(v),
                LambdaSource::Slot(s) => {
                    let raw = self.lambda_raw[s];
                    if key.is_positive() {
                        raw.exp()
                    } else {
                        raw
                    }
                }
            };
        }
        out
    }

    pub fn theta(&self, cfg: &BarqConfig) -> T {
        self.theta_b.unwrap_or_else(|| T::lit(cfg.theta_b))
    }
}

impl BarqParameters<f64> {
    /// Given free points, with λ and θ_B at their configured starting values.
    pub fn with_points(cfg: &BarqConfig, points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() != cfg.n_free {
            return Err(Error::Configuration(format!(
                "free_points: expected {} points, got {}",
                cfg.n_free,
                points.len()
            )));
        }
        let mut lambda_raw = Vec::new();
        let (layout, _) = cfg.lambda_layout();
        for (i, key) in LambdaKey::ALL.into_iter().enumerate() {
            if key == LambdaKey::L3 && cfg.tie_lambda3 {
                continue;
            }
            if let (LambdaSource::Slot(_), LambdaSetting::Optimizable { init }) = (layout[i], cfg.setting(key)) {
                lambda_raw.push(if key.is_positive() { init.ln() } else { init });
            }
        }
        Ok(Self {
            free_points: points.into_iter().map(Vec3::from_f64).collect(),
            lambda_raw,
            theta_b: cfg.optimize_theta_b.then_some(cfg.theta_b),
        })
    }

    /// Free points drawn uniformly from [−1, 1]³; p₂ is redrawn while
    /// nearly parallel to p₁.
    pub fn random(cfg: &BarqConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draw = |rng: &mut ChaCha8Rng| [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
        let mut pts: Vec<[f64; 3]> = (0..cfg.n_free).map(|_| draw(&mut rng)).collect();
        loop {
            let (a, b) = (Vec3::<f64>::from_f64(pts[0]), Vec3::<f64>::from_f64(pts[1]));
            let (na, nb) = (a.norm(), b.norm());
            if na > 1e-6 && nb > 1e-6 && (a.dot(b) / (na * nb)).abs() <= 0.999 {
                break;
            }
            pts[1] = draw(&mut rng);
            if na <= 1e-6 {
                pts[0] = draw(&mut rng);
            }
        }
        Self::with_points(cfg, pts)
    }
}

/// R_B(0) with rows (−B, N, T): T = p̂₁, B ∝ p̂₁ × p̂₂, N = B × T.
pub fn initial_frame_rb0<T: Scalar>(p1: Vec3<T>, p2: Vec3<T>) -> Result<Mat3<T>> {
    let (n1, n2) = (p1.norm(), p2.norm());
    if n1.primal() == 0.0 || n2.primal() == 0.0 {
        return Err(Error::DegenerateFrame("p1 and p2 must be nonzero".into()));
    }
    let t = p1.scale(n1.recip());
    let c = t.cross(p2.scale(n2.recip()));
    let cn = c.norm();
    // |p̂₁ × p̂₂| is the sine of the angle between them.
    if !(cn.primal() > 1e-6) {
        return Err(Error::DegenerateFrame(format!(
            "p1 and p2 are parallel (sin angle = {:.3e}); R_B(0) is undefined",
            cn.primal()
        )));
    }
    let b = c.scale(cn.recip());
    let n = b.cross(t);
    Ok(Mat3::from_rows(-b, n, t))
}

fn lift<T: Scalar>(m: &Mat3<f64>) -> Mat3<T> {
    let mut out = Mat3::identity();
    for i in 0..3 {
        for j in 0..3 {
            out.m[i][j] = T::lit(m.m[i][j]);
        }
    }
    out
}

/// Assemble w₀..w_n, n = N + 5.
pub fn build_control_points<T: Scalar>(params: &BarqParameters<T>, cfg: &BarqConfig) -> Result<ControlPointSet<T>> {
    if params.free_points.len() != cfg.n_free {
        return Err(Error::Configuration(format!(
            "free_points: expected {} points, got {}",
            cfg.n_free,
            params.free_points.len()
        )));
    }
    let [l1p, l2, l3p, l3, lm3p, lm3, lm2, lm1p] = params.lambdas(cfg);
    let (p1, p2) = (params.free_points[0], params.free_points[1]);
    let rb0 = initial_frame_rb0(p1, p2)?;
    let p1h = p1.normalized();
    let p2h = p2.normalized();
    let a = lift::<T>(&cfg.target.adjoint) * rb0;
    let (a1, a2, a3) = (a.row(0), a.row(1), a.row(2));
    let (s, c) = params.theta(cfg).sin_cos();

    let mut w = Vec::with_capacity(cfg.n_free + 6);
    w.push(Vec3::zero());
    w.push(p1h.scale(l1p));
    w.push(p1h.scale(l2));
    w.push(p2h.scale(l3p) + p1h.scale(l3));
    w.extend_from_slice(&params.free_points[2..]);
    w.push((a1.scale(s) - a2.scale(c)).scale(lm3p) - a3.scale(lm3));
    w.push(-a3.scale(lm2));
    w.push(-a3.scale(lm1p));
    w.push(Vec3::zero());
    ControlPointSet::new(w)
}

/// max |R_B(T_g) − R_Zᵀ(θ_B) R_g R_B(0)| with both end frames read off the
/// control points.
pub fn verify_gate_encoding(points: &ControlPointSet<f64>, target: &GateTarget, theta_b: f64) -> Result<f64> {
    let w = points.points();
    let n = w.len() - 1;
    let rb0 = initial_frame_rb0(w[1], w[3])?;
    let te = -w[n - 1].normalized();
    let c = w[n - 1].cross(w[n - 3]);
    if !(c.norm() > 1e-12 * w[n - 1].norm() * w[n - 3].norm()) {
        return Err(Error::DegenerateFrame("w_{n-1} is parallel to w_{n-3}".into()));
    }
    let be = c.normalized();
    let rbe = Mat3::from_rows(-be, be.cross(te), te);
    let want = Mat3::rot_z(theta_b).transpose() * target.adjoint * rb0;
    Ok(rbe.max_abs_diff(&want))
}
