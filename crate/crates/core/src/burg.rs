//! Univariate Burg AR estimation, reflection-coefficient order diagnosis,
//! and AR power spectral density.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Burg AR(p) estimate.
///
/// `ar_coeffs` follow the predictor convention `x(n) = Σ a_k x(n-k) + e(n)`.
/// `reflection_coeffs` are the lattice coefficients of the prediction-error
/// filter `1 + Σ c_k z^{-k}` (so `k_1 = -r(1)/r(0)` for a lag-1 correlated input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurgModel {
    pub ar_coeffs: Vec<f64>,
    pub reflection_coeffs: Vec<f64>,
    pub noise_var: f64,
}

impl BurgModel {
    pub fn order(&self) -> usize {
        self.ar_coeffs.len()
    }

    /// White-noise model with the given innovation variance.
    pub fn white(noise_var: f64) -> Self {
        BurgModel {
            ar_coeffs: Vec::new(),
            reflection_coeffs: Vec::new(),
            noise_var,
        }
    }
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Burg lattice recursion minimizing the summed forward and backward
/// prediction-error power at every stage.
pub fn burg_fit(signal: &[f64], order: usize) -> Result<BurgModel> {
    ensure!(order >= 1, "Burg order must be at least 1");
    if signal.len() <= 2 * order {
        return Err(Error::Length(format!(
            "{} samples cannot support a Burg AR({order}) fit",
            signal.len()
        )));
    }
    let first = signal[0];
    if signal.iter().all(|&v| v == first) {
        return Err(Error::DegenerateSignal("signal is constant".into()));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSignal("signal has non-finite samples".into()));
    }

    let n = signal.len();
    let mut fwd = signal.to_vec();
    let mut bwd = signal.to_vec();
    let mut poly = vec![1.0];
    let mut reflection = Vec::with_capacity(order);
    let mut err = dot(signal, signal) / n as f64;

    for m in 0..order {
        // Stage m uses f(t) for t > m and b(t - 1).
        let f = &fwd[m + 1..n];
        let b = &bwd[m..n - 1];
        let den = dot(f, f) + dot(b, b);
        let k = if den > 0.0 {
            (-2.0 * dot(f, b) / den).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        for t in (m + 1..n).rev() {
            let ft = fwd[t];
            let bt = bwd[t - 1];
            fwd[t] = ft + k * bt;
            bwd[t] = bt + k * ft;
        }
        let prev = poly.clone();
        poly.push(0.0);
        for j in 1..=m + 1 {
            poly[j] += k * prev[m + 1 - j];
        }
        err *= 1.0 - k * k;
        reflection.push(k);
    }

    Ok(BurgModel {
        ar_coeffs: poly[1..].iter().map(|c| -c).collect(),
        reflection_coeffs: reflection,
        noise_var: err.max(0.0),
    })
}

/// Order read off the reflection coefficients: the largest `m ≤ scan_order`
/// with `|k_m| ≥ decay_threshold`, or 1 if none reach it.
pub fn select_order_reflection(signal: &[f64], scan_order: usize, decay_threshold: f64) -> Result<usize> {
    ensure!(scan_order >= 2, "scan order must be at least 2, got {scan_order}");
    ensure!(
        decay_threshold > 0.0 && decay_threshold < 1.0,
        "decay threshold must lie in (0, 1), got {decay_threshold}"
    );
    let model = burg_fit(signal, scan_order)?;
    Ok(model
        .reflection_coeffs
        .iter()
        .rposition(|k| k.abs() >= decay_threshold)
        .map_or(1, |m| m + 1))
}

/// One-sided AR power spectral density at each frequency:
/// `2·σ² / (fs·|1 - Σ a_k e^{-2πi f k / fs}|²)`.
///
/// The one-sided scaling makes the density integrate over `[0, fs/2]` to the
/// process variance.
pub fn burg_psd(model: &BurgModel, freqs_hz: &[f64], sample_rate_hz: f64) -> Result<Vec<f64>> {
    ensure!(sample_rate_hz > 0.0, "sample rate must be positive");
    let nyquist = sample_rate_hz / 2.0;
    freqs_hz
        .iter()
        .map(|&f| {
            if !(0.0..nyquist).contains(&f) {
                return Err(Error::Range(format!("frequency {f} Hz outside [0, {nyquist}) Hz")));
            }
            let w = 2.0 * PI * f / sample_rate_hz;
            let denom: Complex64 = Complex64::new(1.0, 0.0)
                - model
                    .ar_coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &a)| Complex64::from_polar(a, -w * (k + 1) as f64))
                    .sum::<Complex64>();
            Ok(2.0 * model.noise_var / (sample_rate_hz * denom.norm_sqr()))
        })
        .collect()
}
