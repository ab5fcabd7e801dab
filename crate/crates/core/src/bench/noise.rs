//! Colored dephasing noise with PSD S(ω) = λ² T_g / (ω/ω_B)^α, ω_B = 2π/T_g,
//! generated by FIR filtering white Gaussian noise.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdModel {
    pub alpha: f64,
    /// Amplitude λ in rad/time.
    pub lambda: f64,
}

impl PsdModel {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        let m = Self { alpha, lambda };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha != 1.0 && self.alpha != 2.0 {
            return Err(Error::Unsupported(format!("alpha = {}: only 1 and 2 are implemented", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Configuration(format!("lambda: must be finite and ≥ 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// S(ω) for a gate of duration `t_g`, two-sided, normalized so that
    /// ∫S dω/2π is the variance.
    pub fn psd(&self, t_g: f64, omega: f64) -> f64 {
        let wb = 2.0 * std::f64::consts::PI / t_g;
        self.lambda * self.lambda * t_g / (omega.abs() / wb).powf(self.alpha)
    }
}

/// h[n] = Γ(α/2 + n) / (n! Γ(α/2)), the taps of (1 − z⁻¹)^{−α/2}.
pub fn fir_impulse_response(alpha: f64, len: usize) -> Vec<f64> {
    let mut h = Vec::with_capacity(len);
    if len == 0 {
        return h;
    }
    h.push(1.0);
    let a = alpha / 2.0;
    for n in 1..len {
        h.push(h[n - 1] * (a + n as f64 - 1.0) / n as f64);
    }
    h
}

/// Per-sample variance of the white input, σ_d² = λ² N (2π/N)^α.
pub fn input_variance(alpha: f64, lambda: f64, n_samples: usize) -> f64 {
    let n = n_samples as f64;
    lambda * lambda * n * (2.0 * std::f64::consts::PI / n).powf(alpha)
}

/// Reusable generator: FFT plans and the transformed filter are built once.
pub struct NoiseGenerator {
    model: PsdModel,
    n_samples: usize,
    skip: usize,
    sigma: f64,
    fft_len: usize,
    filter: Arc<Vec<Complex64>>,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl NoiseGenerator {
    pub fn new(model: PsdModel, n_samples: usize) -> Result<Self> {
        model.validate()?;
        if n_samples < 256 || !n_samples.is_power_of_two() {
            return Err(Error::Configuration(format!(
                "n_samples: must be a power of two ≥ 256, got {n_samples}"
            )));
        }
        // The first N/8 outputs are a start-up transient and are dropped.
        let skip = n_samples / 8;
        let total = n_samples + skip;
        let fft_len = (2 * total).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_len);
        let inverse = planner.plan_fft_inverse(fft_len);
        let mut filter: Vec<Complex64> =
            fir_impulse_response(model.alpha, total).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        filter.resize(fft_len, Complex64::new(0.0, 0.0));
        forward.process(&mut filter);
        Ok(Self {
            model,
            n_samples,
            skip,
            sigma: input_variance(model.alpha, model.lambda, n_samples).sqrt(),
            fft_len,
            filter: Arc::new(filter),
            forward,
            inverse,
        })
    }

    pub fn model(&self) -> PsdModel {
        self.model
    }

    /// Realization on substream `stream` of `seed`.
    pub fn sample(&self, seed: u64, stream: u64) -> Vec<f64> {
        if self.model.lambda == 0.0 {
            return vec![0.0; self.n_samples];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let total = self.n_samples + self.skip;
        let mut buf: Vec<Complex64> = (0..self.fft_len)
            .map(|k| {
                let v = if k < total { StandardNormal.sample(&mut rng) } else { 0.0 };
                Complex64::new(self.sigma * v, 0.0)
            })
            .collect();
        self.forward.process(&mut buf);
        for (b, h) in buf.iter_mut().zip(self.filter.iter()) {
            *b *= h;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        buf[self.skip..total].iter().map(|c| c.re * scale).collect()
    }
}

/// One δz trace of `n_samples` points spanning a gate of duration `t_g`.
/// The discrete PSD does not depend on `t_g`; it only fixes ω_B.
pub fn generate_colored_noise(alpha: f64, lambda: f64, n_samples: usize, _t_g: f64, seed: u64) -> Result<Vec<f64>> {
    Ok(NoiseGenerator::new(PsdModel::new(alpha, lambda)?, n_samples)?.sample(seed, 0))
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.abs().ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Log-log slope of the averaged periodogram over DFT bins `lo..hi`.
///
/// The periodogram is taken of the first difference and divided by
/// 4 sin²(ω/2), which removes the leakage a plain periodogram shows for
/// steep spectra.
pub fn estimate_psd_slope(
    alpha: f64,
    n_samples: usize,
    realizations: usize,
    seed: u64,
    bins: (usize, usize),
) -> Result<f64> {
    let (lo, hi) = bins;
    if lo == 0 || hi <= lo + 1 || hi > n_samples / 2 {
        return Err(Error::Configuration(format!("bins: invalid range {lo}..{hi}")));
    }
    let gen = NoiseGenerator::new(PsdModel::new(alpha, 1.0)?, n_samples)?;
    let m = n_samples - 1;
    let fft = FftPlanner::new().plan_fft_forward(m);
    let mut acc = vec![0.0; hi];
    for r in 0..realizations {
        let x = gen.sample(seed, r as u64);
        let mut d: Vec<Complex64> = x.windows(2).map(|w| Complex64::new(w[1] - w[0], 0.0)).collect();
        fft.process(&mut d);
        for k in lo..hi {
            acc[k] += d[k].norm_sqr();
        }
    }
    let w: Vec<f64> = (lo..hi).map(|k| 2.0 * std::f64::consts::PI * k as f64 / m as f64).collect();
    let s: Vec<f64> = (lo..hi).zip(&w).map(|(k, &wk)| acc[k] / (4.0 * (wk / 2.0).sin().powi(2))).collect();
    Ok(loglog_slope(&w, &s))
}
