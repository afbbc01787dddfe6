#![allow(dead_code)]

use mipdc_core::mvar::MvarModel;
use mipdc_core::synth::check_stability;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense random MVAR(p) model with companion spectral radius at most
/// `max_radius` and a random positive-definite noise covariance.
///
/// Scaling `A_k` by `c^k` scales every companion eigenvalue by `c`.
pub fn random_stable_model(rng: &mut ChaCha8Rng, m: usize, p: usize, max_radius: f64) -> MvarModel {
    let scale = 1.0 / ((m * p) as f64).sqrt();
    let mut coeffs: Vec<DMatrix<f64>> = (0..p)
        .map(|_| DMatrix::from_fn(m, m, |_, _| scale * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let probe = MvarModel::new(coeffs.clone(), DMatrix::identity(m, m)).unwrap();
    let radius = check_stability(&probe);
    if radius > max_radius {
        let c = max_radius / radius;
        for (k, a) in coeffs.iter_mut().enumerate() {
            *a *= c.powi(k as i32 + 1);
        }
    }
    let b = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let cov = DMatrix::identity(m, m) + &b * b.transpose() * (0.3 / m as f64);
    MvarModel::new(coeffs, cov).unwrap()
}

/// Predictor coefficients `a` (with `x(n) = Σ a_k x(n-k) + e(n)`) of the
/// error filter built by the step-up recursion from reflection coefficients.
pub fn ar_from_reflection(ks: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = Vec::new();
    for &k in ks {
        let prev = c.clone();
        let m = prev.len() + 1;
        c.push(k);
        for j in 1..m {
            c[j - 1] = prev[j - 1] + k * prev[m - j - 1];
        }
    }
    c.iter().map(|v| -v).collect()
}

/// Scalar AR series driven by unit Gaussian noise, after a 2000-sample burn-in.
pub fn ar_series(a: &[f64], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng(seed);
    let burn = 2000;
    let mut x = vec![0.0; burn + n];
    for t in 0..x.len() {
        let mut v: f64 = rng.sample(StandardNormal);
        for (k, ak) in a.iter().enumerate() {
            if t > k {
                v += ak * x[t - k - 1];
            }
        }
        x[t] = v;
    }
    x.split_off(burn)
}
