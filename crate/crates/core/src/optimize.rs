//! Losses over the Frenet data of BARQ curves, forward-mode gradients and Adam.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barq::{build_control_points, BarqConfig, BarqParameters};
use crate::bezier::BezierCurve;
use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::frenet::{evaluate_frenet_with, FrenetData, FrenetOptions, OPTIMIZATION_GRID};
use crate::scalar::Scalar;
use crate::Dual64;

/// Exponent of the power mean standing in for max |κ|.
pub const SMOOTH_MAX_POWER: i32 = 32;

/// ‖∫ T×Ṫ dt‖².
pub fn loss_drive<T: Scalar>(fd: &FrenetData<T>) -> T {
    fd.tangent_area().norm_sq()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RabiMax {
    /// Power mean (mean |κ|^p)^{1/p}, never above the true max.
    Smooth { p: i32 },
    Exact,
}

impl Default for RabiMax {
    fn default() -> Self {
        RabiMax::Smooth { p: SMOOTH_MAX_POWER }
    }
}

/// T_g · max |κ|, dimensionless and scale invariant.
pub fn loss_rabi<T: Scalar>(fd: &FrenetData<T>, max: RabiMax) -> T {
    let k2: Vec<T> = fd.samples.iter().map(|s| s.kappa * s.kappa).collect();
    let mut top = T::zero();
    for &v in &k2 {
        if v > top {
            top = v;
        }
    }
    if top.primal() == 0.0 {
        return T::zero();
    }
    let m = match max {
        RabiMax::Exact => top.sqrt(),
        RabiMax::Smooth { p } => {
            // Factor out the max so the powers stay in range.
            let half = p / 2;
            let mean = k2.iter().map(|&v| (v / top).powi(half)).sum::<T>() / T::lit(k2.len() as f64);
            top.sqrt() * mean.powf(T::lit(1.0 / p as f64))
        }
    };
    fd.total_length * m
}

/// A user-supplied loss term, evaluated on primal or dual frame data.
pub trait CustomLoss: Send + Sync {
    fn name(&self) -> &str;
    fn eval_f64(&self, fd: &FrenetData<f64>) -> f64;
    fn eval_dual(&self, fd: &FrenetData<Dual64>) -> Dual64;
}

/// Scalars on which custom losses can be evaluated.
pub trait LossScalar: Scalar {
    fn custom(loss: &dyn CustomLoss, fd: &FrenetData<Self>) -> Self;
}

impl LossScalar for f64 {
    fn custom(loss: &dyn CustomLoss, fd: &FrenetData<f64>) -> f64 {
        loss.eval_f64(fd)
    }
}

impl LossScalar for Dual<f64> {
    fn custom(loss: &dyn CustomLoss, fd: &FrenetData<Dual64>) -> Dual64 {
        loss.eval_dual(fd)
    }
}

#[derive(Clone)]
pub enum LossKind {
    Drive,
    Rabi,
    Custom(Arc<dyn CustomLoss>),
}

impl LossKind {
    pub fn name(&self) -> &str {
        match self {
            LossKind::Drive => "drive",
            LossKind::Rabi => "rabi",
            LossKind::Custom(c) => c.name(),
        }
    }
}

impl fmt::Debug for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct LossTerm {
    pub kind: LossKind,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct LossSpec {
    pub terms: Vec<LossTerm>,
    pub rabi_max: RabiMax,
}

impl LossSpec {
    pub fn new(terms: Vec<LossTerm>) -> Result<Self> {
        let spec = Self { terms, rabi_max: RabiMax::default() };
        spec.validate()?;
        Ok(spec)
    }

    /// J_drive + w·J_Rabi.
    pub fn drive_rabi(rabi_weight: f64) -> Self {
        Self {
            terms: vec![
                LossTerm { kind: LossKind::Drive, weight: 1.0 },
                LossTerm { kind: LossKind::Rabi, weight: rabi_weight },
            ],
            rabi_max: RabiMax::default(),
        }
    }

    /// J_BARQ = J_drive + 10⁻² J_Rabi.
    pub fn barq() -> Self {
        Self::drive_rabi(1e-2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Configuration("loss.terms: at least one term is required".into()));
        }
        for t in &self.terms {
            if !t.weight.is_finite() || t.weight < 0.0 {
                return Err(Error::Configuration(format!(
                    "loss.terms: weight of '{}' must be finite and nonnegative, got {}",
                    t.kind.name(),
                    t.weight
                )));
            }
        }
        if let RabiMax::Smooth { p } = self.rabi_max {
            if p < 2 || p % 2 != 0 {
                return Err(Error::Configuration(format!("loss.rabi_max: p must be even and ≥ 2, got {p}")));
            }
        }
        Ok(())
    }

    pub fn term_names(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.kind.name().to_string()).collect()
    }
}

/// Σ wᵢ·termᵢ together with the unweighted terms.
pub fn total_loss<T: LossScalar>(fd: &FrenetData<T>, spec: &LossSpec) -> (T, Vec<T>) {
    let terms: Vec<T> = spec
        .terms
        .iter()
        .map(|t| match &t.kind {
            LossKind::Drive => loss_drive(fd),
            LossKind::Rabi => loss_rabi(fd, spec.rabi_max),
            LossKind::Custom(c) => T::custom(c.as_ref(), fd),
        })
        .collect();
    let total = spec.terms.iter().zip(&terms).map(|(t, &v)| T::lit(t.weight) * v).sum();
    (total, terms)
}

/// Value and gradient of `f` at `x`, one dual pass per coordinate. Passes
/// run in parallel and are collected in coordinate order.
pub fn gradient<F>(f: F, x: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&[Dual64]) -> Result<Dual64> + Sync,
{
    if x.is_empty() {
        let v = f(&[])?.re;
        return if v.is_finite() { Ok((v, vec![])) } else { Err(non_finite(v)) };
    }
    let passes: Vec<Dual64> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let xd: Vec<Dual64> =
                x.iter().enumerate().map(|(j, &v)| if i == j { Dual::variable(v) } else { Dual::constant(v) }).collect();
            f(&xd)
        })
        .collect::<Result<_>>()?;
    let value = passes[0].re;
    if !value.is_finite() {
        return Err(non_finite(value));
    }
    let grad: Vec<f64> = passes.iter().map(|d| d.eps).collect();
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::Evaluation(format!("gradient component {i} is not finite")));
    }
    Ok((value, grad))
}

fn non_finite(v: f64) -> Error {
    Error::Evaluation(format!("loss is not finite ({v})"))
}

/// Something Adam can minimize.
pub trait Objective: Sync {
    fn term_names(&self) -> Vec<String>;
    /// Total loss and unweighted terms.
    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// Total loss, unweighted terms and gradient.
    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)>;
}

/// Objective from a closure over dual numbers, with no separate terms.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&[Dual64]) -> Result<Dual64> + Sync,
{
    fn term_names(&self) -> Vec<String> {
        vec![]
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let xd: Vec<Dual64> = x.iter().map(|&v| Dual::constant(v)).collect();
        Ok(((self.0)(&xd)?.re, vec![]))
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (v, g) = gradient(&self.0, x)?;
        Ok((v, vec![], g))
    }
}

/// Loss of the BARQ curve built from a flat parameter vector.
#[derive(Debug, Clone)]
pub struct BarqObjective {
    pub config: BarqConfig,
    pub loss: LossSpec,
    pub frenet: FrenetOptions,
}

impl BarqObjective {
    pub fn new(config: BarqConfig, loss: LossSpec) -> Result<Self> {
        config.validate()?;
        loss.validate()?;
        Ok(Self { config, loss, frenet: FrenetOptions::with_grid(OPTIMIZATION_GRID) })
    }

    pub fn with_grid(mut self, grid_size: usize) -> Self {
        self.frenet.grid_size = grid_size;
        self
    }

    pub fn frenet_data<T: Scalar>(&self, x: &[T]) -> Result<FrenetData<T>> {
        let params = BarqParameters::from_vector(&self.config, x)?;
        let points = build_control_points(&params, &self.config)?;
        evaluate_frenet_with(&BezierCurve::new(points), &self.frenet)
    }

    pub fn eval<T: LossScalar>(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        Ok(total_loss(&self.frenet_data(x)?, &self.loss))
    }
}

impl Objective for BarqObjective {
    fn term_names(&self) -> Vec<String> {
        self.loss.term_names()
    }

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.eval(x)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (v, g) = gradient(|xd| self.eval(xd).map(|r| r.0), x)?;
        // Terms are cheap next to the gradient passes.
        let (_, terms) = self.eval(x)?;
        Ok((v, terms, g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Record every `stride` steps; step 0 and the final step are always kept.
    pub stride: usize,
    /// When set, the learning rate decays geometrically to this value at the
    /// last step.
    pub lr_final: Option<f64>,
    /// Keep the parameter vector in every record.
    pub record_params: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 5e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8, stride: 100, lr_final: None, record_params: false }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.stride >= 1
            && self.lr_final.map_or(true, |l| l > 0.0 && l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Configuration(format!("adam: invalid hyperparameters {self:?}")))
        }
    }

    fn lr_at(&self, step: usize, steps: usize) -> f64 {
        match self.lr_final {
            None => self.lr,
            Some(end) => self.lr * (end / self.lr).powf(step as f64 / steps as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub total: f64,
    pub terms: Vec<f64>,
    /// Max-norm of the gradient.
    pub grad_norm: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub params: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub term_names: Vec<String>,
    pub records: Vec<TraceRecord>,
    pub initial_params: Vec<f64>,
    pub final_params: Vec<f64>,
    pub steps: usize,
    pub hyperparameters: AdamConfig,
}

impl OptimizationTrace {
    pub fn first(&self) -> &TraceRecord {
        &self.records[0]
    }

    pub fn last(&self) -> &TraceRecord {
        &self.records[self.records.len() - 1]
    }

    /// Unweighted term by name from a record.
    pub fn term(&self, record: &TraceRecord, name: &str) -> Option<f64> {
        self.term_names.iter().position(|n| n == name).map(|i| record.terms[i])
    }
}

fn max_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Adam with bias correction for a fixed number of steps.
pub fn run_adam<O: Objective + ?Sized>(
    objective: &O,
    x0: &[f64],
    steps: usize,
    hp: &AdamConfig,
) -> Result<OptimizationTrace> {
    if steps == 0 {
        return Err(Error::Configuration("steps: must be at least 1".into()));
    }
    hp.validate()?;
    let mut trace = OptimizationTrace {
        term_names: objective.term_names(),
        records: Vec::new(),
        initial_params: x0.to_vec(),
        final_params: x0.to_vec(),
        steps,
        hyperparameters: *hp,
    };
    let mut x = x0.to_vec();
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let (mut b1t, mut b2t) = (1.0, 1.0);
    let diverge = |step: usize, reason: String, trace: &mut OptimizationTrace, x: &[f64]| {
        trace.final_params = x.to_vec();
        Error::Divergence { step, reason, trace: Box::new(trace.clone()) }
    };

    for step in 0..steps {
        let (total, terms, g) = match objective.value_and_grad(&x) {
            Ok(r) => r,
            Err(e) => return Err(diverge(step, e.to_string(), &mut trace, &x)),
        };
        if step % hp.stride == 0 {
            trace.records.push(TraceRecord {
                step,
                total,
                terms,
                grad_norm: max_norm(&g),
                params: hp.record_params.then(|| x.clone()),
            });
        }
        b1t *= hp.beta1;
        b2t *= hp.beta2;
        let lr = hp.lr_at(step, steps);
        for i in 0..x.len() {
            m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
            v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1t);
            let vh = v[i] / (1.0 - b2t);
            x[i] -= lr * mh / (vh.sqrt() + hp.eps);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(diverge(step + 1, "parameters became non-finite".into(), &mut trace, &x));
        }
    }

    let (total, terms, g) = match objective.value_and_grad(&x) {
        Ok(r) => r,
        Err(e) => return Err(diverge(steps, e.to_string(), &mut trace, &x)),
    };
    trace.records.push(TraceRecord {
        step: steps,
        total,
        terms,
        grad_norm: max_norm(&g),
        params: hp.record_params.then(|| x.clone()),
    });
    trace.final_params = x;
    Ok(trace)
}
