//! Stable MVAR processes with prescribed directed coupling, and two-class
//! epoch sets built from them.
//!
//! Every generated sample path is a pure function of `(truth, seed, stream)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::spectral_radius;
use crate::mvar::MvarModel;
use crate::signal_io::{segment_epochs, ClassLabel, EpochSet, Recording, TrialMark, DEFAULT_CHANNELS};

/// A model together with its directed-coupling pattern and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub model: MvarModel,
    /// `(from, to)` pairs with `A_k[to][from] ≠ 0` for some lag.
    pub coupling_edges: Vec<(usize, usize)>,
    pub seed: u64,
}

impl GroundTruth {
    /// Derives the coupling pattern from the off-diagonal non-zeros.
    pub fn new(model: MvarModel, seed: u64) -> Self {
        let m = model.n_channels();
        let mut coupling_edges = Vec::new();
        for from in 0..m {
            for to in 0..m {
                if from != to && model.coeffs().iter().any(|a| a[(to, from)] != 0.0) {
                    coupling_edges.push((from, to));
                }
            }
        }
        GroundTruth {
            model,
            coupling_edges,
            seed,
        }
    }
}

/// Spectral radius of the `Mp × Mp` companion matrix `[[A_1 … A_p], [I, 0]]`.
pub fn check_stability(model: &MvarModel) -> f64 {
    let m = model.n_channels();
    let p = model.order();
    let d = m * p;
    let mut companion = DMatrix::<f64>::zeros(d, d);
    for (k, a) in model.coeffs().iter().enumerate() {
        companion.view_mut((0, k * m), (m, m)).copy_from(a);
    }
    for r in m..d {
        companion[(r, r - m)] = 1.0;
    }
    spectral_radius(&companion)
}

/// Lower factor `L` with `L Lᵀ = Σ` for a symmetric positive semi-definite `Σ`.
fn noise_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol.l());
    }
    let eig = SymmetricEigen::new(cov.clone());
    let scale = eig.eigenvalues.abs().max().max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-9 * scale) {
        return Err(Error::Contract("noise covariance is not positive semi-definite".into()));
    }
    let sqrt = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()));
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt))
}

pub const DEFAULT_BURN_IN_PER_ORDER: usize = 100;

/// Simulates the model forward from zero state with Gaussian innovations,
/// discarding the first `burn_in` samples. Seeded by `truth.seed`.
pub fn generate(truth: &GroundTruth, n_samples: usize, burn_in: usize) -> Result<DMatrix<f64>> {
    generate_stream(truth, n_samples, burn_in, 0)
}

/// As [`generate`], drawing from an independent stream of the same seed.
pub fn generate_stream(truth: &GroundTruth, n_samples: usize, burn_in: usize, stream: u64) -> Result<DMatrix<f64>> {
    let radius = check_stability(&truth.model);
    if !(radius < 1.0) {
        return Err(Error::Stability { radius });
    }
    let model = &truth.model;
    let m = model.n_channels();
    let p = model.order();
    let factor = noise_factor(model.noise_cov())?;

    let mut rng = ChaCha8Rng::seed_from_u64(truth.seed);
    rng.set_stream(stream);
    let total = burn_in + n_samples;
    let mut x = DMatrix::<f64>::zeros(m, total);
    let mut z = DVector::<f64>::zeros(m);
    for t in 0..total {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut next = &factor * &z;
        for (k, a) in model.coeffs().iter().enumerate().take(t.min(p)) {
            next.gemv(1.0, a, &x.column(t - k - 1), 1.0);
        }
        x.set_column(t, &next);
    }
    Ok(x.columns(burn_in, n_samples).into_owned())
}

/// A directed lagged influence `from → to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingEdge {
    pub from: usize,
    pub to: usize,
    /// 1-based lag.
    pub lag: usize,
    pub weight: f64,
}

/// Narrowband oscillation added to one channel in one class.
///
/// With `bandwidth_hz > 0` it is an AR(2) resonance with that -3 dB width,
/// otherwise a sinusoid with random phase. Either way its variance is
/// `amplitude² / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedRhythm {
    pub channel: usize,
    pub freq_hz: f64,
    pub amplitude: f64,
    pub bandwidth_hz: f64,
    pub class: ClassLabel,
}

impl PlantedRhythm {
    fn render(&self, sample_rate_hz: f64, len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let theta = 2.0 * PI * self.freq_hz / sample_rate_hz;
        if self.bandwidth_hz <= 0.0 {
            let phase: f64 = rng.random_range(0.0..2.0 * PI);
            return (0..len)
                .map(|t| self.amplitude * (theta * t as f64 + phase).sin())
                .collect();
        }
        let r = (-PI * self.bandwidth_hz / sample_rate_hz).exp();
        let (a1, a2) = (2.0 * r * theta.cos(), -r * r);
        let var = (1.0 - a2) / ((1.0 + a2) * ((1.0 - a2).powi(2) - a1 * a1));
        let gain = self.amplitude / (2.0 * var).sqrt();
        // Ten time constants of the envelope reach stationarity.
        let burn_in = (10.0 / (1.0 - r)).ceil() as usize;
        let (mut x1, mut x2) = (0.0, 0.0);
        let mut out = Vec::with_capacity(len);
        for t in 0..burn_in + len {
            let e: f64 = rng.sample(StandardNormal);
            let x = a1 * x1 + a2 * x2 + e;
            x2 = x1;
            x1 = x;
            if t >= burn_in {
                out.push(gain * x);
            }
        }
        out
    }
}

/// Two-class dataset recipe.
///
/// Every channel follows an AR(2) resonance (`base_radius`, frequency taken
/// cyclically from `base_freqs_hz`; radius 0 gives white channels);
/// `shared_edges` couple channels in both classes, `class1_edges` /
/// `class2_edges` only in one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_channels: usize,
    pub order: usize,
    pub sample_rate_hz: f64,
    pub epoch_seconds: f64,
    pub epochs_per_class: usize,
    pub base_freqs_hz: Vec<f64>,
    pub base_radius: f64,
    pub noise_std: f64,
    pub shared_edges: Vec<CouplingEdge>,
    pub class1_edges: Vec<CouplingEdge>,
    pub class2_edges: Vec<CouplingEdge>,
    pub rhythm: Option<PlantedRhythm>,
    /// Defaults to `100 × order` when `None`.
    pub burn_in: Option<usize>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    /// Sixteen white channels at 1200 Hz, 30 one-second epochs per class, one
    /// class-1-only edge `CZ → C4` and a class-1 24 Hz sinusoid on `P4`.
    fn default() -> Self {
        ScenarioConfig {
            n_channels: 16,
            order: 2,
            sample_rate_hz: 1200.0,
            epoch_seconds: 1.0,
            epochs_per_class: 30,
            base_freqs_hz: vec![10.0, 20.0, 12.0, 24.0],
            base_radius: 0.0,
            noise_std: 1.0,
            shared_edges: Vec::new(),
            class1_edges: vec![CouplingEdge {
                from: 5,
                to: 6,
                lag: 1,
                weight: 0.4,
            }],
            class2_edges: Vec::new(),
            rhythm: Some(PlantedRhythm {
                channel: 13,
                freq_hz: 24.0,
                amplitude: 2.0,
                bandwidth_hz: 0.0,
                class: ClassLabel::Class1,
            }),
            burn_in: None,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn channel_names(&self) -> Vec<String> {
        if self.n_channels == DEFAULT_CHANNELS.len() {
            DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect()
        } else {
            (1..=self.n_channels).map(|c| format!("ch{c}")).collect()
        }
    }

    pub fn epoch_len(&self) -> usize {
        (self.epoch_seconds * self.sample_rate_hz).round() as usize
    }

    fn validate(&self) -> Result<()> {
        ensure!(self.n_channels >= 1, "scenario needs at least one channel");
        ensure!(
            self.order >= 2,
            "scenario order must be at least 2 for the AR(2) base dynamics"
        );
        ensure!(self.sample_rate_hz > 0.0, "sample rate must be positive");
        ensure!(self.epoch_len() >= 1, "epochs must hold at least one sample");
        ensure!(self.epochs_per_class >= 1, "at least one epoch per class");
        ensure!(!self.base_freqs_hz.is_empty(), "base resonance list is empty");
        ensure!(
            self.base_freqs_hz
                .iter()
                .all(|&f| f > 0.0 && f < self.sample_rate_hz / 2.0),
            "base resonances must lie below Nyquist"
        );
        ensure!(
            (0.0..1.0).contains(&self.base_radius),
            "base pole radius must lie in [0, 1)"
        );
        ensure!(self.noise_std > 0.0, "noise level must be positive");
        for e in self
            .shared_edges
            .iter()
            .chain(&self.class1_edges)
            .chain(&self.class2_edges)
        {
            ensure!(
                e.from < self.n_channels && e.to < self.n_channels && e.from != e.to,
                "edge {} -> {} is not a valid pair of distinct channels",
                e.from,
                e.to
            );
            ensure!(
                (1..=self.order).contains(&e.lag),
                "edge lag {} outside 1..={}",
                e.lag,
                self.order
            );
        }
        if let Some(r) = &self.rhythm {
            ensure!(r.channel < self.n_channels, "rhythm channel {} out of range", r.channel);
            ensure!(
                r.freq_hz > 0.0 && r.freq_hz < self.sample_rate_hz / 2.0,
                "rhythm frequency must lie below Nyquist"
            );
            ensure!(r.bandwidth_hz >= 0.0, "rhythm bandwidth must not be negative");
        }
        Ok(())
    }

    /// True model of one class.
    pub fn model_for(&self, class: ClassLabel) -> Result<MvarModel> {
        self.validate()?;
        let m = self.n_channels;
        let mut coeffs = vec![DMatrix::<f64>::zeros(m, m); self.order];
        for c in 0..m {
            let f = self.base_freqs_hz[c % self.base_freqs_hz.len()];
            let theta = 2.0 * PI * f / self.sample_rate_hz;
            coeffs[0][(c, c)] = 2.0 * self.base_radius * theta.cos();
            coeffs[1][(c, c)] = -self.base_radius * self.base_radius;
        }
        let specific = match class {
            ClassLabel::Class1 => &self.class1_edges,
            ClassLabel::Class2 => &self.class2_edges,
        };
        for e in self.shared_edges.iter().chain(specific) {
            coeffs[e.lag - 1][(e.to, e.from)] += e.weight;
        }
        let cov = DMatrix::identity(m, m) * self.noise_std.powi(2);
        MvarModel::new(coeffs, cov)?.with_channels(self.channel_names())
    }
}

/// Generated two-class dataset.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Epochs laid end to end, one labelled trial per epoch.
    pub recording: Recording,
    pub epochs: EpochSet,
    /// Ground truth of Class1 and Class2.
    pub truths: [GroundTruth; 2],
}

/// Builds both class models, checks stability, and simulates
/// `epochs_per_class` independent epochs per class.
///
/// Epochs alternate Class1, Class2, … in the recording. Epoch `e` of class
/// `c` is drawn from stream `(c << 32) | e` of the scenario seed.
pub fn make_two_class_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    let truths = [
        GroundTruth::new(config.model_for(ClassLabel::Class1)?, config.seed),
        GroundTruth::new(config.model_for(ClassLabel::Class2)?, config.seed),
    ];
    for t in &truths {
        let radius = check_stability(&t.model);
        if !(radius < 1.0) {
            return Err(Error::Stability { radius });
        }
    }
    let len = config.epoch_len();
    let burn_in = config.burn_in.unwrap_or(DEFAULT_BURN_IN_PER_ORDER * config.order);
    let m = config.n_channels;
    let total = 2 * config.epochs_per_class * len;
    let mut samples = DMatrix::<f64>::zeros(m, total);
    let mut marks = Vec::with_capacity(2 * config.epochs_per_class);

    for e in 0..config.epochs_per_class {
        for (ci, class) in ClassLabel::BOTH.into_iter().enumerate() {
            let stream = ((ci as u64) << 32) | e as u64;
            let mut x = generate_stream(&truths[ci], len, burn_in, stream)?;
            if let Some(r) = config.rhythm.filter(|r| r.class == class) {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f72_6879);
                rng.set_stream(stream);
                for (t, v) in r.render(config.sample_rate_hz, len, &mut rng).into_iter().enumerate() {
                    x[(r.channel, t)] += v;
                }
            }
            let start = (2 * e + ci) * len;
            samples.columns_mut(start, len).copy_from(&x);
            marks.push(TrialMark {
                start,
                end: start + len,
                label: Some(class),
            });
        }
    }

    let recording = Recording::new(samples, config.sample_rate_hz, config.channel_names(), marks)?;
    let epochs = segment_epochs(&recording, config.epoch_seconds)?;
    Ok(Scenario {
        recording,
        epochs,
        truths,
    })
}
