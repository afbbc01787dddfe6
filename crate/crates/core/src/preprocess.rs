//! Filtering front end: Butterworth band-pass, biquad notch, zero-phase
//! forward-backward application, optional decimation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::signal_io::{Recording, TrialMark};

/// Rational transfer function `B(z) / A(z)` with `a[0] = 1`.
///
/// Filtering runs through a cascade of low-order sections whose product is
/// `B / A`; the expanded polynomials are kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct IirFilter {
    b: Vec<f64>,
    a: Vec<f64>,
    sections: Vec<Section>,
}

#[derive(Debug, Clone, PartialEq)]
struct Section {
    b: Vec<f64>,
    a: Vec<f64>,
}

impl Section {
    fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        if b.is_empty() || a.is_empty() || a[0] == 0.0 {
            return Err(Error::Design(
                "coefficient lists must be non-empty with a[0] != 0".into(),
            ));
        }
        let a0 = a[0];
        let n = a.len().max(b.len());
        let mut b: Vec<f64> = b.iter().map(|v| v / a0).collect();
        let mut a: Vec<f64> = a.iter().map(|v| v / a0).collect();
        b.resize(n, 0.0);
        a.resize(n, 0.0);
        Ok(Section { b, a })
    }

    fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }
}

fn convolve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, &u) in x.iter().enumerate() {
        for (j, &v) in y.iter().enumerate() {
            out[i + j] += u * v;
        }
    }
    out
}

impl IirFilter {
    /// Single-section filter; normalizes so that `a[0] = 1`.
    pub fn new(b: Vec<f64>, a: Vec<f64>) -> Result<Self> {
        Self::from_sections(vec![Section::new(b, a)?])
    }

    fn from_sections(sections: Vec<Section>) -> Result<Self> {
        let mut b = vec![1.0];
        let mut a = vec![1.0];
        for sec in &sections {
            b = convolve(&b, &sec.b);
            a = convolve(&a, &sec.a);
        }
        Ok(IirFilter { b, a, sections })
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn order(&self) -> usize {
        self.a.len().max(self.b.len()) - 1
    }

    /// `H(e^{jω})` at `f_hz`.
    pub fn response(&self, f_hz: f64, sample_rate_hz: f64) -> Complex64 {
        let w = 2.0 * PI * f_hz / sample_rate_hz;
        let eval = |c: &[f64]| -> Complex64 {
            c.iter()
                .enumerate()
                .map(|(k, &v)| Complex64::from_polar(v, -w * k as f64))
                .sum()
        };
        eval(&self.b) / eval(&self.a)
    }

    pub fn gain(&self, f_hz: f64, sample_rate_hz: f64) -> f64 {
        self.response(f_hz, sample_rate_hz).norm()
    }

    /// Roots of `A(z)`.
    pub fn poles(&self) -> Vec<Complex64> {
        self.sections.iter().flat_map(|s| poly_roots(&s.a)).collect()
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|p| p.norm() < 1.0)
    }
}

/// Roots of `c[0] z^n + c[1] z^{n-1} + ... + c[n]` via companion eigenvalues.
fn poly_roots(c: &[f64]) -> Vec<Complex64> {
    let c: Vec<f64> = {
        let first = c.iter().position(|&v| v != 0.0).unwrap_or(c.len());
        c[first..].to_vec()
    };
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        companion[(0, k)] = -c[k + 1] / c[0];
    }
    for k in 1..n {
        companion[(k, k - 1)] = 1.0;
    }
    // Non-convergence is reported as a root on the unit circle so the
    // filter is treated as unstable.
    eigenvalues(&companion).unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n])
}

fn check_edge(name: &str, f_hz: f64, sample_rate_hz: f64) -> Result<()> {
    if !(f_hz > 0.0 && f_hz < sample_rate_hz / 2.0) {
        return Err(Error::Design(format!(
            "{name} {f_hz} Hz must lie in (0, {}) Hz",
            sample_rate_hz / 2.0
        )));
    }
    Ok(())
}

/// Butterworth band-pass of prototype order `order` (the realized filter has
/// `2 × order` poles), designed by bilinear transform with pre-warped edges.
pub fn design_bandpass(low_hz: f64, high_hz: f64, sample_rate_hz: f64, order: usize) -> Result<IirFilter> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::Design("sample rate must be positive".into()));
    }
    check_edge("low edge", low_hz, sample_rate_hz)?;
    check_edge("high edge", high_hz, sample_rate_hz)?;
    if low_hz >= high_hz {
        return Err(Error::Design(format!(
            "low edge {low_hz} Hz must be below high edge {high_hz} Hz"
        )));
    }
    if order == 0 {
        return Err(Error::Design("order must be at least 1".into()));
    }

    let fs2 = 2.0 * sample_rate_hz;
    let w_low = fs2 * (PI * low_hz / sample_rate_hz).tan();
    let w_high = fs2 * (PI * high_hz / sample_rate_hz).tan();
    let bw = w_high - w_low;
    let w0_sq = w_low * w_high;

    // Analog low-pass prototype poles on the left unit semicircle.
    let n = order as f64;
    let proto: Vec<Complex64> = (0..order)
        .map(|k| {
            let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
            Complex64::from_polar(1.0, theta)
        })
        .collect();

    // Low-pass to band-pass: each pole p splits into roots of s² - p·bw·s + w0².
    let mut analog_poles = Vec::with_capacity(2 * order);
    for &p in &proto {
        let pb = p * bw;
        let disc = (pb * pb - 4.0 * w0_sq).sqrt();
        analog_poles.push((pb + disc) / 2.0);
        analog_poles.push((pb - disc) / 2.0);
    }
    // `order` zeros at s = 0, `order` at infinity; analog gain bw^order.
    let analog_gain = bw.powi(order as i32);

    // Bilinear map z = (fs2 + s) / (fs2 - s); zeros at s = 0 land on z = 1,
    // zeros at infinity on z = -1.
    let num: Complex64 = std::iter::repeat_n(Complex64::new(fs2, 0.0), order).product();
    let den: Complex64 = analog_poles.iter().map(|&s| fs2 - s).product();
    let gain = analog_gain * (num / den).re;

    // Pair each upper-half-plane pole with its conjugate and one zero pair
    // (z = 1, z = -1) per section; the overall gain rides on the first section.
    let mut upper: Vec<Complex64> = analog_poles
        .iter()
        .map(|&s| (fs2 + s) / (fs2 - s))
        .filter(|z| z.im > 0.0)
        .collect();
    if upper.len() != order {
        return Err(Error::Design("band-pass poles did not form conjugate pairs".into()));
    }
    upper.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    let sections = upper
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let g = if k == 0 { gain } else { 1.0 };
            Section::new(vec![g, 0.0, -g], vec![1.0, -2.0 * z.re, z.norm_sqr()])
        })
        .collect::<Result<Vec<_>>>()?;
    IirFilter::from_sections(sections)
}

/// Second-order notch with a null at `center_hz` and -3 dB width `center / q`.
pub fn design_notch(center_hz: f64, sample_rate_hz: f64, quality_q: f64) -> Result<IirFilter> {
    if !(sample_rate_hz > 0.0) {
        return Err(Error::Design("sample rate must be positive".into()));
    }
    check_edge("notch center", center_hz, sample_rate_hz)?;
    if !(quality_q > 0.0 && quality_q.is_finite()) {
        return Err(Error::Design(format!(
            "quality factor must be positive, got {quality_q}"
        )));
    }
    let w0 = 2.0 * PI * center_hz / sample_rate_hz;
    let bw = w0 / quality_q;
    let g = 1.0 / (1.0 + (bw / 2.0).tan());
    let c = w0.cos();
    IirFilter::new(vec![g, -2.0 * g * c, g], vec![1.0, -2.0 * g * c, 2.0 * g - 1.0])
}

/// Direct-form II transposed filtering with initial state `zi`.
fn lfilter(b: &[f64], a: &[f64], x: &[f64], zi: &[f64]) -> Vec<f64> {
    let order = b.len() - 1;
    let mut z = zi.to_vec();
    let mut y = Vec::with_capacity(x.len());
    for &xn in x {
        let yn = b[0] * xn + z.first().copied().unwrap_or(0.0);
        for k in 0..order {
            let next = if k + 1 < order { z[k + 1] } else { 0.0 };
            z[k] = next + b[k + 1] * xn - a[k + 1] * yn;
        }
        y.push(yn);
    }
    y
}

/// Steady-state state vector for a unit step input.
fn lfilter_zi(b: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    let order = b.len() - 1;
    if order == 0 {
        return Ok(Vec::new());
    }
    // (I - Cᵀ) zi = b[1..] - a[1..]·b[0], C the companion matrix of a.
    let mut m = DMatrix::<f64>::identity(order, order);
    for k in 0..order {
        m[(k, 0)] += a[k + 1];
    }
    for k in 0..order - 1 {
        m[(k, k + 1)] -= 1.0;
    }
    let rhs = DVector::from_fn(order, |k, _| b[k + 1] - a[k + 1] * b[0]);
    m.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Numerical("steady-state filter state is singular".into()))
}

impl IirFilter {
    /// Per-section step-response steady states, scaled by upstream DC gain.
    fn cascade_zi(&self) -> Result<Vec<Vec<f64>>> {
        let mut scale = 1.0;
        let mut out = Vec::with_capacity(self.sections.len());
        for sec in &self.sections {
            let zi = lfilter_zi(&sec.b, &sec.a)?;
            out.push(zi.iter().map(|v| v * scale).collect());
            scale *= sec.dc_gain();
        }
        Ok(out)
    }

    fn run(&self, x: &[f64], zi: &[Vec<f64>], x0: f64) -> Vec<f64> {
        let mut y = x.to_vec();
        for (sec, z) in self.sections.iter().zip(zi) {
            let init: Vec<f64> = z.iter().map(|v| v * x0).collect();
            y = lfilter(&sec.b, &sec.a, &y, &init);
        }
        y
    }
}

/// Zero-phase forward-backward filtering with odd-reflected edge padding of
/// `3 × max(len(a), len(b))` samples and steady-state initial conditions.
pub fn filtfilt(filter: &IirFilter, signal: &[f64]) -> Result<Vec<f64>> {
    let pad = 3 * filter.a.len().max(filter.b.len());
    if signal.len() <= pad {
        return Err(Error::Length(format!(
            "signal of {} samples is too short for edge padding of {pad}",
            signal.len()
        )));
    }
    let n = signal.len();
    let first = signal[0];
    let last = signal[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|k| 2.0 * first - signal[k]));
    ext.extend_from_slice(signal);
    ext.extend((1..=pad).map(|k| 2.0 * last - signal[n - 1 - k]));

    let zi = filter.cascade_zi()?;
    let forward = filter.run(&ext, &zi, ext[0]);
    let reversed: Vec<f64> = forward.into_iter().rev().collect();
    let mut backward = filter.run(&reversed, &zi, reversed[0]);
    backward.reverse();
    Ok(backward[pad..pad + n].to_vec())
}

/// Filtering front-end parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub enabled: bool,
    pub bandpass_low_hz: f64,
    pub bandpass_high_hz: f64,
    pub bandpass_order: usize,
    /// Notch center; `None` disables the notch.
    pub notch_center_hz: Option<f64>,
    pub notch_q: f64,
    /// Integer decimation factor applied after filtering; 1 keeps the rate.
    pub decimate_factor: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            enabled: true,
            bandpass_low_hz: 5.0,
            bandpass_high_hz: 50.0,
            bandpass_order: 4,
            notch_center_hz: Some(50.0),
            notch_q: 35.0,
            decimate_factor: 1,
        }
    }
}

/// Band-pass then notch, both zero-phase, per channel; then optional
/// decimation by keeping every `decimate_factor`-th sample.
///
/// Trial marks are rescaled by integer division.
pub fn preprocess_recording(rec: &Recording, config: &PreprocessConfig) -> Result<Recording> {
    if config.decimate_factor == 0 {
        return Err(Error::Contract("decimation factor must be at least 1".into()));
    }
    let fs = rec.sample_rate_hz();
    let mut stages = Vec::new();
    if config.enabled {
        stages.push(design_bandpass(
            config.bandpass_low_hz,
            config.bandpass_high_hz,
            fs,
            config.bandpass_order,
        )?);
        if let Some(center) = config.notch_center_hz {
            stages.push(design_notch(center, fs, config.notch_q)?);
        }
    }
    let factor = config.decimate_factor;
    let new_fs = fs / factor as f64;
    if factor > 1 && config.enabled && config.bandpass_high_hz >= new_fs / 2.0 {
        return Err(Error::Design(format!(
            "decimating to {new_fs} Hz would alias the {} Hz pass band edge",
            config.bandpass_high_hz
        )));
    }

    let samples = rec.samples();
    let rows: Vec<Vec<f64>> = (0..rec.n_channels())
        .into_par_iter()
        .map(|c| {
            let mut x: Vec<f64> = samples.row(c).iter().copied().collect();
            for f in &stages {
                x = filtfilt(f, &x)?;
            }
            Ok(x)
        })
        .collect::<Result<_>>()?;

    let n_out = rec.n_samples().div_ceil(factor);
    let out = DMatrix::from_fn(rec.n_channels(), n_out, |c, t| rows[c][t * factor]);
    let marks: Vec<TrialMark> = rec
        .trial_marks()
        .iter()
        .map(|m| TrialMark {
            start: m.start / factor,
            end: (m.end / factor).max(m.start / factor + 1).min(n_out),
            label: m.label,
        })
        .collect();
    rec.with_samples(out, new_fs, marks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_io::ClassLabel;

    fn sine(f_hz: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|t| (2.0 * PI * f_hz * t as f64 / fs + phase).sin())
            .collect()
    }

    fn db(g: f64) -> f64 {
        20.0 * g.log10()
    }

    #[test]
    fn bandpass_matches_reference_design() {
        // scipy.signal.butter(4, [5, 50], 'bandpass', fs=1200)
        let f = design_bandpass(5.0, 50.0, 1200.0, 4).unwrap();
        let b_ref = [
            0.000_144_120_224_075_38,
            0.0,
            -0.000_576_480_896_301_53,
            0.0,
            0.000_864_721_344_452_3,
            0.0,
            -0.000_576_480_896_301_53,
            0.0,
            0.000_144_120_224_075_38,
        ];
        let a_ref = [
            1.0,
            -7.359_561_620_355_763_4,
            23.736_172_784_630_607,
            -43.821_977_377_947_974,
            50.657_024_445_113_564,
            -37.546_859_750_240_976,
            17.426_416_757_197_096,
            -4.630_570_365_029_611,
            0.539_355_128_280_307_6,
        ];
        for (got, want) in f.b().iter().zip(b_ref) {
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-6), "{got} vs {want}");
        }
        for (got, want) in f.a().iter().zip(a_ref) {
            assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn bandpass_passband_and_dc() {
        let f = design_bandpass(5.0, 50.0, 1200.0, 4).unwrap();
        assert!(f.is_stable());
        assert!(db(f.gain(20.0, 1200.0)).abs() < 1.0);
        assert!(f.gain(0.0, 1200.0) < 1e-3);
        assert!(db(f.gain(5.0, 1200.0)) >= -3.1);
        assert!(db(f.gain(50.0, 1200.0)) >= -3.1);
    }

    #[test]
    fn bandpass_decays_monotonically_outside_the_band() {
        let f = design_bandpass(5.0, 50.0, 1200.0, 4).unwrap();
        let below: Vec<f64> = (0..=50).map(|k| f.gain(k as f64 * 0.1, 1200.0)).collect();
        assert!(below.windows(2).all(|w| w[0] <= w[1] + 1e-15));
        let above: Vec<f64> = (50..600).map(|k| f.gain(k as f64, 1200.0)).collect();
        assert!(above.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn bandpass_rejects_bad_edges() {
        assert!(matches!(design_bandpass(50.0, 5.0, 1200.0, 4), Err(Error::Design(_))));
        assert!(matches!(design_bandpass(0.0, 5.0, 1200.0, 4), Err(Error::Design(_))));
        assert!(matches!(design_bandpass(5.0, 600.0, 1200.0, 4), Err(Error::Design(_))));
        assert!(matches!(design_bandpass(5.0, 50.0, 1200.0, 0), Err(Error::Design(_))));
    }

    #[test]
    fn notch_null_and_passband() {
        let f = design_notch(50.0, 1200.0, 35.0).unwrap();
        assert!(f.is_stable());
        assert!(f.gain(50.0, 1200.0) < 0.01);
        assert!(f.gain(20.0, 1200.0) > 0.99);
        assert!((f.gain(0.0, 1200.0) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn notch_matches_reference_design() {
        // scipy.signal.iirnotch(50, 35, fs=1200)
        let f = design_notch(50.0, 1200.0, 35.0).unwrap();
        let b_ref = [
            0.996_273_926_853_830_6,
            -1.924_653_432_013_082_4,
            0.996_273_926_853_830_6,
        ];
        let a_ref = [1.0, -1.924_653_432_013_082_4, 0.992_547_853_707_661_3];
        for (got, want) in f.b().iter().zip(b_ref).chain(f.a().iter().zip(a_ref)) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn notch_above_nyquist_rejected() {
        assert!(matches!(design_notch(700.0, 1200.0, 35.0), Err(Error::Design(_))));
        assert!(matches!(design_notch(50.0, 1200.0, 0.0), Err(Error::Design(_))));
    }

    #[test]
    fn filtfilt_matches_reference() {
        // scipy.signal.filtfilt(b, a, x) with b, a = butter(2, 0.2) and
        // x = sin(0.3 t) + 0.5 cos(1.7 t), t = 0..40
        let f = IirFilter::new(
            vec![
                0.067_455_273_889_071_89,
                0.134_910_547_778_143_8,
                0.067_455_273_889_071_89,
            ],
            vec![1.0, -1.142_980_502_539_901_1, 0.412_801_598_096_188_8],
        )
        .unwrap();
        let x: Vec<f64> = (0..40)
            .map(|t| (0.3 * t as f64).sin() + 0.5 * (1.7 * t as f64).cos())
            .collect();
        let y = filtfilt(&f, &x).unwrap();
        let y_ref = [
            (0, 0.497_806_326_265_135_77),
            (5, 0.908_864_373_853_879_5),
            (17, -0.887_158_882_147_392_7),
            (39, -1.242_733_888_667_261_4),
        ];
        for (k, want) in y_ref {
            assert!((y[k] - want).abs() < 1e-9, "y[{k}] = {} vs {want}", y[k]);
        }
    }

    #[test]
    fn filtfilt_is_zero_phase_in_passband() {
        let f = design_bandpass(5.0, 50.0, 1200.0, 4).unwrap();
        let x = sine(20.0, 1200.0, 4800, 0.3);
        let y = filtfilt(&f, &x).unwrap();
        // Project the middle third on sin/cos at 20 Hz and compare phases.
        let phase = |s: &[f64]| {
            let (mut re, mut im) = (0.0, 0.0);
            for t in 1600..3200 {
                let w = 2.0 * PI * 20.0 * t as f64 / 1200.0;
                re += s[t] * w.cos();
                im += s[t] * w.sin();
            }
            im.atan2(re)
        };
        assert!((phase(&x) - phase(&y)).abs() < 0.01);
        // Cross-correlation peaks at lag zero.
        let xc = |lag: i64| -> f64 { (1600..3200).map(|t| x[t] * y[(t as i64 + lag) as usize]).sum() };
        let best = (-20..=20).max_by(|&l, &m| xc(l).total_cmp(&xc(m))).unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn filtfilt_zero_in_zero_out() {
        let f = design_bandpass(5.0, 50.0, 1200.0, 4).unwrap();
        let y = filtfilt(&f, &vec![0.0; 500]).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn filtfilt_notch_attenuates_mains_by_40_db() {
        let f = design_notch(50.0, 1200.0, 35.0).unwrap();
        let x = sine(50.0, 1200.0, 12_000, 0.0);
        let y = filtfilt(&f, &x).unwrap();
        let rms = |s: &[f64]| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        let ratio = rms(&y[4000..8000]) / rms(&x[4000..8000]);
        assert!(db(ratio) <= -40.0, "attenuation {} dB", db(ratio));
    }

    #[test]
    fn filtfilt_rejects_short_signal() {
        let f = design_notch(50.0, 1200.0, 35.0).unwrap();
        assert!(matches!(filtfilt(&f, &[1.0; 9]), Err(Error::Length(_))));
        assert!(filtfilt(&f, &[1.0; 10]).is_ok());
    }

    #[test]
    fn filtfilt_is_linear() {
        let f = design_bandpass(5.0, 50.0, 1200.0, 4).unwrap();
        let x = sine(13.0, 1200.0, 600, 0.1);
        let y: Vec<f64> = (0..600).map(|t| ((t * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let (alpha, beta) = (2.5, -0.75);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let fx = filtfilt(&f, &x).unwrap();
        let fy = filtfilt(&f, &y).unwrap();
        let fm = filtfilt(&f, &mix).unwrap();
        for t in 0..600 {
            assert!((fm[t] - (alpha * fx[t] + beta * fy[t])).abs() < 1e-9);
        }
    }

    fn recording(samples: DMatrix<f64>, fs: f64) -> Recording {
        let n = samples.ncols();
        let names = (0..samples.nrows()).map(|c| format!("c{c}")).collect();
        let marks = vec![
            TrialMark {
                start: 0,
                end: n / 2,
                label: Some(ClassLabel::Class1),
            },
            TrialMark {
                start: n / 2,
                end: n,
                label: Some(ClassLabel::Class2),
            },
        ];
        Recording::new(samples, fs, names, marks).unwrap()
    }

    #[test]
    fn constant_recording_is_rejected_to_zero() {
        let rec = recording(DMatrix::from_element(2, 2400, 3.0), 1200.0);
        let out = preprocess_recording(&rec, &PreprocessConfig::default()).unwrap();
        assert!(out.samples().iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn decimation_rescales_rate_and_marks() {
        let rec = recording(DMatrix::from_fn(1, 2400, |_, t| (t as f64 * 0.1).sin()), 1200.0);
        let config = PreprocessConfig {
            decimate_factor: 4,
            ..PreprocessConfig::default()
        };
        let out = preprocess_recording(&rec, &config).unwrap();
        assert_eq!(out.sample_rate_hz(), 300.0);
        assert_eq!(out.n_samples(), 600);
        assert_eq!(out.trial_marks()[0].end, 300);
        assert_eq!(out.trial_marks()[1].start, 300);
        assert_eq!(out.trial_marks()[1].end, 600);
    }

    #[test]
    fn decimation_below_passband_is_rejected() {
        let rec = recording(DMatrix::zeros(1, 2400), 1200.0);
        let config = PreprocessConfig {
            decimate_factor: 12,
            ..PreprocessConfig::default()
        };
        assert!(matches!(preprocess_recording(&rec, &config), Err(Error::Design(_))));
    }
}
