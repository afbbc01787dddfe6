//! Eigenvalue helpers that terminate on every input.
//!
//! The unbounded QR iteration behind `DMatrix::complex_eigenvalues` can cycle
//! forever on exactly structured matrices such as block companions with zero
//! blocks, so every caller goes through a bounded Schur decomposition.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

const MAX_QR_ITERATIONS: usize = 10_000;

/// Eigenvalues, or `None` when the QR iteration does not converge.
pub(crate) fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    if m.is_empty() {
        return Some(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, MAX_QR_ITERATIONS)?;
    Some(
        schur
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect(),
    )
}

/// Spectral radius. Falls back to Gelfand's formula `‖Mⁿ‖^{1/n}` with
/// `n = 2⁴⁰` by repeated squaring when the QR iteration stalls.
pub(crate) fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if let Some(ev) = eigenvalues(m) {
        return ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    }
    let mut power = m.clone();
    // log ‖Mⁿ‖ is tracked separately so the normalized iterate never overflows.
    let mut log_scale = 0.0;
    let mut n = 1.0;
    for _ in 0..40 {
        let norm = power.norm();
        if norm == 0.0 {
            return 0.0;
        }
        power /= norm;
        log_scale += norm.ln();
        power = &power * &power;
        log_scale *= 2.0;
        n *= 2.0;
    }
    let norm = power.norm();
    if norm == 0.0 {
        return 0.0;
    }
    ((log_scale + norm.ln()) / n).exp()
}
