//! Multichannel least-squares MVAR fitting and AIC order selection.
//!
//! The model is `x(n) = Σ_{k=1..p} A_k x(n-k) + e(n)`; `A_k[i][j]` carries the
//! lag-`k` influence of channel `j` on channel `i`. Each channel is demeaned
//! before fitting.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::signal_io::Epoch;

/// Fitted or prescribed MVAR(p) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MvarWire", into = "MvarWire")]
pub struct MvarModel {
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
    channels: Vec<String>,
}

impl MvarModel {
    pub fn new(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let m = noise_cov.nrows();
        ensure!(
            m >= 1 && noise_cov.is_square(),
            "noise covariance must be square and non-empty"
        );
        ensure!(!coeffs.is_empty(), "an MVAR model needs at least one lag");
        for (k, a) in coeffs.iter().enumerate() {
            ensure!(
                a.shape() == (m, m),
                "A_{} is {}x{}, expected {m}x{m}",
                k + 1,
                a.nrows(),
                a.ncols()
            );
            ensure!(a.iter().all(|v| v.is_finite()), "A_{} has non-finite entries", k + 1);
        }
        let asym = (&noise_cov - noise_cov.transpose()).abs().max();
        ensure!(
            asym <= 1e-9 * noise_cov.abs().max().max(1.0),
            "noise covariance is not symmetric"
        );
        let channels = (1..=m).map(|c| format!("x{c}")).collect();
        Ok(MvarModel {
            coeffs,
            noise_cov,
            channels,
        })
    }

    /// Same model with channel names attached.
    pub fn with_channels(mut self, channels: Vec<String>) -> Result<Self> {
        ensure!(
            channels.len() == self.n_channels(),
            "{} names for {} channels",
            channels.len(),
            self.n_channels()
        );
        self.channels = channels;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn n_channels(&self) -> usize {
        self.noise_cov.nrows()
    }

    /// `A_1 ..= A_p`.
    pub fn coeffs(&self) -> &[DMatrix<f64>] {
        &self.coeffs
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    /// One-step prediction residuals over `n = p..N-1` of the demeaned epoch.
    pub fn residuals(&self, samples: &DMatrix<f64>) -> DMatrix<f64> {
        let x = demeaned(samples);
        let p = self.order();
        let n = x.ncols();
        let mut e = x.columns(p, n - p).into_owned();
        for (k, a) in self.coeffs.iter().enumerate() {
            let lagged = x.columns(p - k - 1, n - p);
            e -= a * lagged;
        }
        e
    }
}

#[derive(Serialize, Deserialize)]
struct MvarWire {
    p: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
    noise_cov: Vec<Vec<f64>>,
    channels: Vec<String>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    ensure!(
        rows.iter().all(|r| r.len() == n),
        "matrix rows must form an {n}x{n} square"
    );
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

impl From<MvarModel> for MvarWire {
    fn from(m: MvarModel) -> Self {
        MvarWire {
            p: m.order(),
            a: m.coeffs.iter().map(to_rows).collect(),
            noise_cov: to_rows(&m.noise_cov),
            channels: m.channels,
        }
    }
}

impl TryFrom<MvarWire> for MvarModel {
    type Error = Error;

    fn try_from(w: MvarWire) -> Result<Self> {
        ensure!(w.p == w.a.len(), "p = {} but {} coefficient matrices", w.p, w.a.len());
        let coeffs = w.a.iter().map(|m| from_rows(m)).collect::<Result<Vec<_>>>()?;
        MvarModel::new(coeffs, from_rows(&w.noise_cov)?)?.with_channels(w.channels)
    }
}

fn demeaned(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = samples.clone();
    for mut row in x.row_iter_mut() {
        let mean = row.mean();
        row.add_scalar_mut(-mean);
    }
    x
}

/// Lagged cross-products over the common span `n = max_order..N-1`.
///
/// The order-`p` regressor `[x(n-1); ...; x(n-p)]` is a prefix of the
/// order-`max_order` one, so every order reuses leading blocks of one Gram.
struct LagProducts {
    n_channels: usize,
    span: usize,
    /// `Z Zᵀ`, `(M·max) × (M·max)`.
    gram: DMatrix<f64>,
    /// `Y Zᵀ`, `M × (M·max)`.
    cross: DMatrix<f64>,
    /// `Y Yᵀ`.
    target: DMatrix<f64>,
}

impl LagProducts {
    fn new(samples: &DMatrix<f64>, max_order: usize) -> Self {
        let x = demeaned(samples);
        let m = x.nrows();
        let span = x.ncols() - max_order;
        let mut z = DMatrix::<f64>::zeros(m * max_order, span);
        for k in 0..max_order {
            z.rows_mut(k * m, m).copy_from(&x.columns(max_order - k - 1, span));
        }
        let y = x.columns(max_order, span);
        LagProducts {
            n_channels: m,
            span,
            gram: &z * z.transpose(),
            cross: y * z.transpose(),
            target: y * y.transpose(),
        }
    }

    /// Rejects constant or linearly dependent channels using the zero-lag
    /// channel covariance, which is the leading block of the Gram matrix.
    fn check_channel_rank(&self) -> Result<()> {
        let m = self.n_channels;
        let g = self.gram.view((0, 0), (m, m)).into_owned();
        let mut work = g.clone();
        for k in 0..m {
            if !(g[(k, k)] > 0.0) {
                return Err(Error::Singularity(format!("channel {} is constant", k + 1)));
            }
            // Plain Cholesky elimination, tracking each pivot against its
            // original diagonal.
            for j in 0..k {
                let v = work[(k, j)];
                for i in k..m {
                    let w = work[(i, j)];
                    work[(i, k)] -= v * w;
                }
            }
            let pivot = work[(k, k)];
            if !(pivot > 1e-10 * g[(k, k)]) {
                return Err(Error::Singularity(format!(
                    "channel {} is linearly dependent on the others",
                    k + 1
                )));
            }
            let d = pivot.sqrt();
            for i in k..m {
                work[(i, k)] /= d;
            }
        }
        Ok(())
    }

    /// Coefficients and residual sum of squares at `order ≤ max_order`.
    ///
    /// Band-limited data make lagged regressors nearly collinear, so each
    /// diagonal entry of the Gram matrix is inflated by the relative amount
    /// `(q² + q + 1)·ε`, with `q` the regressor count, as in ARfit. This only
    /// perturbs well-conditioned problems at rounding level.
    fn solve(&self, order: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_channel_rank()?;
        let d = self.n_channels * order;
        let mut g = self.gram.view((0, 0), (d, d)).into_owned();
        let q = d as f64;
        let delta = (q * q + q + 1.0) * f64::EPSILON;
        for k in 0..d {
            g[(k, k)] *= 1.0 + delta;
        }
        let c = self.cross.columns(0, d).into_owned();
        let chol: Cholesky<f64, Dyn> = Cholesky::new(g)
            .ok_or_else(|| Error::Singularity(format!("lag Gram matrix of order {order} is not positive definite")))?;
        let l = chol.l_dirty();
        // B = C G⁻¹, residual SSE = S - C G⁻¹ Cᵀ.
        let b = chol.solve(&c.transpose()).transpose();
        let w = l
            .solve_lower_triangular(&c.transpose())
            .ok_or_else(|| Error::Singularity("triangular solve failed".into()))?;
        let mut sse = &self.target - w.transpose() * &w;
        symmetrize(&mut sse);
        Ok((b, sse))
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn split_blocks(b: &DMatrix<f64>, order: usize) -> Vec<DMatrix<f64>> {
    let m = b.nrows();
    (0..order).map(|k| b.columns(k * m, m).into_owned()).collect()
}

fn check_length(n: usize, m: usize, order: usize) -> Result<()> {
    if n <= m * order + order {
        return Err(Error::Length(format!(
            "epoch of {n} samples cannot support an MVAR({order}) fit on {m} channels \
             (needs more than {})",
            m * order + order
        )));
    }
    Ok(())
}

/// Least-squares MVAR(`order`) fit of one epoch.
///
/// The residual covariance uses the divisor `N - p - M·p`, clamped to at least 1.
pub fn fit_mvar(epoch: &Epoch, order: usize) -> Result<MvarModel> {
    fit_mvar_samples(&epoch.samples, order)
}

/// [`fit_mvar`] on a bare `channels × time` matrix.
pub fn fit_mvar_samples(samples: &DMatrix<f64>, order: usize) -> Result<MvarModel> {
    ensure!(order >= 1, "MVAR order must be at least 1");
    let (m, n) = samples.shape();
    ensure!(m >= 1, "epoch has no channels");
    check_length(n, m, order)?;
    let products = LagProducts::new(samples, order);
    let (b, sse) = products.solve(order)?;
    let dof = (n as f64 - order as f64 - (m * order) as f64).max(1.0);
    MvarModel::new(split_blocks(&b, order), sse / dof)
}

/// AIC values for orders `1..=max_order`, all scored on the span
/// `n = max_order..N-1`: `N_eff·ln det Σ_p + 2·M²·p`.
pub fn aic_curve(samples: &DMatrix<f64>, max_order: usize) -> Result<Vec<f64>> {
    ensure!(max_order >= 1, "maximum order must be at least 1");
    let (m, n) = samples.shape();
    ensure!(m >= 1, "epoch has no channels");
    check_length(n, m, max_order)?;
    let products = LagProducts::new(samples, max_order);
    let span = products.span as f64;
    (1..=max_order)
        .map(|p| {
            let (_, sse) = products.solve(p)?;
            let dof = (span - (m * p) as f64).max(1.0);
            let cov = sse / dof;
            let chol = Cholesky::new(cov)
                .ok_or_else(|| Error::Singularity(format!("residual covariance at order {p} is singular")))?;
            let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
            Ok(span * log_det + 2.0 * (m * m * p) as f64)
        })
        .collect()
}

/// Order in `1..=max_order` minimizing [`aic_curve`]; ties go to the smaller order.
pub fn select_order_aic(epoch: &Epoch, max_order: usize) -> Result<usize> {
    select_order_aic_samples(&epoch.samples, max_order)
}

pub fn select_order_aic_samples(samples: &DMatrix<f64>, max_order: usize) -> Result<usize> {
    let curve = aic_curve(samples, max_order)?;
    let mut best = 0;
    for (k, &v) in curve.iter().enumerate() {
        if v < curve[best] {
            best = k;
        }
    }
    Ok(best + 1)
}
