//! Binary soft-margin SVM with an RBF kernel, trained by sequential minimal
//! optimization, plus the repeated random-split evaluation harness.
//!
//! The solver works on the dual
//!
//! ```text
//! min_α  ½ αᵀQα − eᵀα   s.t.  0 ≤ α_i ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! selecting at each step the maximal-violating pair and stopping once the
//! KKT gap `max_{I_up} −y_i∇_i − min_{I_low} −y_j∇_j` falls below the tolerance.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burg::{burg_fit, burg_psd};
use crate::discriminability::FeatureSpec;
use crate::error::{ensure, Error, Result};
use crate::grid::Band;
use crate::signal_io::{ClassLabel, EpochSet};
use crate::stats::{mean, sample_std};

/// Box constraint and kernel width used throughout the power track.
pub const DEFAULT_C: f64 = 512.0;
pub const DEFAULT_GAMMA: f64 = 0.002;
pub const KKT_TOLERANCE: f64 = 1e-3;

const TAU: f64 = 1e-12;

pub fn rbf_kernel(u: &[f64], v: &[f64], gamma: f64) -> f64 {
    let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

/// Trained classifier: only samples with `α_i > 0` are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` per support vector.
    pub dual_coeffs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c_penalty: f64,
}

/// Solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainInfo {
    /// Dual variables for every training sample.
    pub alphas: Vec<f64>,
    pub iterations: usize,
    /// KKT gap at termination.
    pub gap: f64,
}

impl SvmModel {
    pub fn dimension(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    /// `Σ α_i y_i K(sv_i, x) + b`.
    pub fn decision_value(&self, feature: &[f64]) -> Result<f64> {
        ensure!(
            feature.len() == self.dimension(),
            "feature has dimension {}, model expects {}",
            feature.len(),
            self.dimension()
        );
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coeffs)
            .map(|(sv, c)| c * rbf_kernel(sv, feature, self.gamma))
            .sum::<f64>()
            + self.bias)
    }
}

/// Predicted label (`±1`, exact zero maps to `+1`) and decision value.
pub fn svm_predict(model: &SvmModel, feature: &[f64]) -> Result<(f64, f64)> {
    let d = model.decision_value(feature)?;
    Ok((if d >= 0.0 { 1.0 } else { -1.0 }, d))
}

pub fn svm_train(features: &[Vec<f64>], labels: &[f64], c_penalty: f64, gamma: f64) -> Result<SvmModel> {
    svm_train_detailed(features, labels, c_penalty, gamma).map(|(m, _)| m)
}

pub fn svm_train_detailed(
    features: &[Vec<f64>],
    labels: &[f64],
    c_penalty: f64,
    gamma: f64,
) -> Result<(SvmModel, TrainInfo)> {
    ensure!(
        c_penalty > 0.0 && c_penalty.is_finite() && gamma > 0.0 && gamma.is_finite(),
        "C and gamma must be positive and finite"
    );
    ensure!(
        features.len() == labels.len(),
        "{} feature vectors for {} labels",
        features.len(),
        labels.len()
    );
    ensure!(labels.iter().all(|&y| y == 1.0 || y == -1.0), "labels must be +1 or -1");
    ensure!(
        labels.contains(&1.0) && labels.contains(&-1.0),
        "training needs samples of both labels"
    );
    let dim = features[0].len();
    ensure!(dim > 0, "feature vectors are empty");
    ensure!(
        features.iter().all(|f| f.len() == dim),
        "feature vectors differ in dimension"
    );
    ensure!(
        features.iter().flatten().all(|v| v.is_finite()),
        "features must be finite"
    );

    let n = features.len();
    let kernel: Vec<f64> = (0..n * n)
        .map(|k| rbf_kernel(&features[k / n], &features[k % n], gamma))
        .collect();
    let k = |i: usize, j: usize| kernel[i * n + j];
    let y = labels;
    let c = c_penalty;

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = (100 * n).max(10_000_000);
    let mut iterations = 0;
    #[cfg(debug_assertions)]
    #[cfg(debug_assertions)]
    let mut objective = 0.0f64;

    let gap = loop {
        let mut up: Option<(usize, f64)> = None;
        let mut low: Option<(usize, f64)> = None;
        for t in 0..n {
            let score = -y[t] * grad[t];
            let in_up = (y[t] > 0.0 && alpha[t] < c) || (y[t] < 0.0 && alpha[t] > 0.0);
            let in_low = (y[t] < 0.0 && alpha[t] < c) || (y[t] > 0.0 && alpha[t] > 0.0);
            if in_up && up.is_none_or(|(_, s)| score > s) {
                up = Some((t, score));
            }
            if in_low && low.is_none_or(|(_, s)| score < s) {
                low = Some((t, score));
            }
        }
        let (Some((i, m_up)), Some((j, m_low))) = (up, low) else {
            break 0.0;
        };
        let gap = m_up - m_low;
        if gap < KKT_TOLERANCE {
            break gap.max(0.0);
        }
        if iterations >= max_iter {
            return Err(Error::Numerical(format!(
                "SMO did not converge in {max_iter} iterations (gap {gap:e})"
            )));
        }
        iterations += 1;

        // Move along d_i = y_i, d_j = -y_j by a step t > 0.
        let eta = (k(i, i) + k(j, j) - 2.0 * k(i, j)).max(TAU);
        let mut step = gap / eta;
        step = step.min(if y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        step = step.min(if y[j] > 0.0 { alpha[j] } else { c - alpha[j] });

        alpha[i] = (alpha[i] + y[i] * step).clamp(0.0, c);
        alpha[j] = (alpha[j] - y[j] * step).clamp(0.0, c);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += y[t] * step * (k(t, i) - k(t, j));
        }

        #[cfg(debug_assertions)]
        {
            // Primal form of the dual objective must not increase.
            let value: f64 = 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>();
            debug_assert!(
                value <= objective + 1e-9 * objective.abs().max(1.0),
                "dual objective decreased: {} -> {}",
                -objective,
                -value
            );
            objective = value;
        }
    };

    // Bias from free support vectors, else the midpoint of the feasible range.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += yg;
            free_count += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };

    let (support_vectors, dual_coeffs) = (0..n)
        .filter(|&t| alpha[t] > 0.0)
        .map(|t| (features[t].clone(), alpha[t] * y[t]))
        .unzip();
    let model = SvmModel {
        support_vectors,
        dual_coeffs,
        bias: -rho,
        gamma,
        c_penalty,
    };
    Ok((
        model,
        TrainInfo {
            alphas: alpha,
            iterations,
            gap,
        },
    ))
}

/// Per-dimension z-scoring fitted on one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    /// Zero-variance dimensions get unit scale.
    pub fn fit(samples: &[&[f64]]) -> Self {
        let dim = samples.first().map_or(0, |s| s.len());
        let mut means = Vec::with_capacity(dim);
        let mut stds = Vec::with_capacity(dim);
        for d in 0..dim {
            let col: Vec<f64> = samples.iter().map(|s| s[d]).collect();
            means.push(mean(&col));
            let sd = sample_std(&col);
            stds.push(if sd > 0.0 { sd } else { 1.0 });
        }
        Standardizer { means, stds }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Repeated random-split evaluation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub c_penalty: f64,
    pub gamma: f64,
    pub n_repeats: usize,
    /// Fraction of each class assigned to training.
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            c_penalty: DEFAULT_C,
            gamma: DEFAULT_GAMMA,
            n_repeats: 100,
            split_fraction: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean_accuracy_pct: f64,
    /// Sample standard deviation over repeats.
    pub std_accuracy_pct: f64,
    pub n_repeats: usize,
    pub per_repeat: Vec<f64>,
}

/// One row of an accuracy table: accuracy, spread, channel and band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    pub per_repeat: Vec<f64>,
    pub channel: String,
    pub band: [f64; 2],
}

impl CvResult {
    pub fn to_row(&self, channel: &str, band: &Band) -> AccuracyRow {
        AccuracyRow {
            mean: self.mean_accuracy_pct,
            std: self.std_accuracy_pct,
            n: self.n_repeats,
            per_repeat: self.per_repeat.clone(),
            channel: channel.to_string(),
            band: [band.low_hz, band.high_hz],
        }
    }
}

/// Stratified train/test index split for one repeat.
pub fn stratified_split(labels: &[ClassLabel], split_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in ClassLabel::BOTH {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&k| labels[k] == class).collect();
        idx.shuffle(&mut rng);
        let n_train = ((idx.len() as f64 * split_fraction).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Test-set accuracy (%) of one split, z-scoring with training statistics.
pub fn evaluate_split(
    features: &[Vec<f64>],
    labels: &[ClassLabel],
    train: &[usize],
    test: &[usize],
    config: &CvConfig,
) -> Result<f64> {
    let train_raw: Vec<&[f64]> = train.iter().map(|&k| features[k].as_slice()).collect();
    let scaler = Standardizer::fit(&train_raw);
    let x_train: Vec<Vec<f64>> = train_raw.iter().map(|x| scaler.apply(x)).collect();
    let y_train: Vec<f64> = train.iter().map(|&k| labels[k].sign()).collect();
    let model = svm_train(&x_train, &y_train, config.c_penalty, config.gamma)?;
    let mut correct = 0usize;
    for &k in test {
        let (pred, _) = svm_predict(&model, &scaler.apply(&features[k]))?;
        if pred == labels[k].sign() {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / test.len() as f64)
}

/// `n_repeats` stratified random splits; repeat `r` draws its split from
/// seed `seed + r`, so results do not depend on scheduling.
pub fn cross_validate(features: &[Vec<f64>], labels: &[ClassLabel], config: &CvConfig) -> Result<CvResult> {
    ensure!(
        features.len() == labels.len(),
        "{} feature vectors for {} labels",
        features.len(),
        labels.len()
    );
    ensure!(
        config.split_fraction > 0.0 && config.split_fraction < 1.0,
        "split fraction must lie in (0, 1)"
    );
    ensure!(config.n_repeats >= 1, "at least one repeat is required");
    for class in ClassLabel::BOTH {
        let n = labels.iter().filter(|&&l| l == class).count();
        ensure!(n >= 2, "{class} has {n} samples, at least 2 required");
    }
    let per_repeat = (0..config.n_repeats)
        .into_par_iter()
        .map(|r| {
            let (train, test) = stratified_split(labels, config.split_fraction, config.seed.wrapping_add(r as u64));
            evaluate_split(features, labels, &train, &test, config)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CvResult {
        mean_accuracy_pct: mean(&per_repeat),
        std_accuracy_pct: sample_std(&per_repeat),
        n_repeats: config.n_repeats,
        per_repeat,
    })
}

/// Burg PSD of the selected channel at the spec's band frequencies, one
/// vector per epoch. Standardization happens inside [`cross_validate`].
pub fn build_feature_vectors(
    epochs: &EpochSet,
    spec: &FeatureSpec,
    burg_order: usize,
) -> Result<(Vec<Vec<f64>>, Vec<ClassLabel>)> {
    ensure!(
        spec.channel < epochs.n_channels(),
        "channel {} does not exist in a {}-channel epoch set",
        spec.channel,
        epochs.n_channels()
    );
    ensure!(!spec.freqs_hz.is_empty(), "feature band holds no grid frequency");
    let features = epochs
        .epochs
        .par_iter()
        .map(|e| {
            let model = burg_fit(&e.channel(spec.channel), burg_order)?;
            burg_psd(&model, &spec.freqs_hz, epochs.sample_rate_hz)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = epochs.epochs.iter().map(|e| e.label).collect();
    Ok((features, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![1.0, 1.0, -1.0, -1.0],
        )
    }

    #[test]
    fn xor_is_separated() {
        let (x, y) = xor();
        let model = svm_train(&x, &y, 100.0, 1.0).unwrap();
        for (f, &label) in x.iter().zip(&y) {
            assert_eq!(svm_predict(&model, f).unwrap().0, label);
        }
        let s: f64 = model.dual_coeffs.iter().sum();
        assert!(s.abs() < 1e-6);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(matches!(svm_train(&x, &[1.0, 1.0], 1.0, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn non_finite_feature_is_rejected() {
        let x = vec![vec![0.0], vec![f64::NAN]];
        assert!(matches!(svm_train(&x, &[1.0, -1.0], 1.0, 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn bad_labels_are_rejected() {
        let x = vec![vec![0.0], vec![1.0]];
        assert!(svm_train(&x, &[1.0, 0.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn prediction_checks_dimension() {
        let (x, y) = xor();
        let model = svm_train(&x, &y, 100.0, 1.0).unwrap();
        assert!(matches!(svm_predict(&model, &[1.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn zero_decision_maps_to_positive() {
        let model = SvmModel {
            support_vectors: vec![vec![0.0]],
            dual_coeffs: vec![0.0],
            bias: 0.0,
            gamma: 1.0,
            c_penalty: 1.0,
        };
        assert_eq!(svm_predict(&model, &[3.0]).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn split_is_stratified_and_seeded() {
        let labels: Vec<ClassLabel> = (0..10)
            .map(|k| if k < 4 { ClassLabel::Class1 } else { ClassLabel::Class2 })
            .collect();
        let (train, test) = stratified_split(&labels, 0.5, 7);
        assert_eq!(train.len() + test.len(), 10);
        let c1_train = train.iter().filter(|&&k| k < 4).count();
        assert_eq!(c1_train, 2);
        assert_eq!(train.len(), 5);
        assert_eq!(stratified_split(&labels, 0.5, 7), (train, test));
    }

    #[test]
    fn two_per_class_still_splits() {
        let labels = [
            ClassLabel::Class1,
            ClassLabel::Class1,
            ClassLabel::Class2,
            ClassLabel::Class2,
        ];
        let (train, test) = stratified_split(&labels, 0.9, 1);
        assert_eq!((train.len(), test.len()), (2, 2));
    }

    #[test]
    fn cross_validation_contract() {
        let x = vec![vec![0.0]; 3];
        let labels = [ClassLabel::Class1, ClassLabel::Class2, ClassLabel::Class2];
        assert!(cross_validate(&x, &labels, &CvConfig::default()).is_err());
    }

    #[test]
    fn standardizer_unit_scale_for_constant_dimension() {
        let a = [1.0, 5.0];
        let b = [3.0, 5.0];
        let s = Standardizer::fit(&[&a, &b]);
        assert_eq!(s.stds[1], 1.0);
        assert_eq!(s.apply(&[2.0, 5.0]), vec![0.0, 0.0]);
    }
}
