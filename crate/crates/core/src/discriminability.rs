//! Two-class comparison statistics: r² discriminability maps over spectral
//! power, feature selection, the Wilcoxon rank-sum test, and rank-sum
//! screening of PDC directions.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::connectivity::PdcTensor;
use crate::error::{ensure, Error, Result};
use crate::grid::Band;
use crate::signal_io::{format_value, ClassLabel};
use crate::stats::{mean, median, midranks};

/// Squared point-biserial correlation between the values and their class
/// membership: the fraction of total variance explained by the class split.
///
/// The pooled deviation is the population standard deviation of the
/// concatenated sample; a zero-variance sample yields 0.
pub fn rsquared(class1: &[f64], class2: &[f64]) -> Result<f64> {
    ensure!(
        !class1.is_empty() && !class2.is_empty(),
        "r² needs samples from both classes"
    );
    let n1 = class1.len() as f64;
    let n2 = class2.len() as f64;
    let n = n1 + n2;
    let m1 = mean(class1);
    let m2 = mean(class2);
    let grand = (m1 * n1 + m2 * n2) / n;
    let ss: f64 = class1.iter().chain(class2).map(|v| (v - grand).powi(2)).sum();
    let std = (ss / n).sqrt();
    if !(std > 0.0) {
        return Ok(0.0);
    }
    let r = (m1 - m2) / std * (n1 * n2).sqrt() / n;
    Ok((r * r).clamp(0.0, 1.0))
}

/// r² per channel and frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct RSquaredMap {
    /// `channels × frequencies`.
    pub values: DMatrix<f64>,
    pub freqs_hz: Vec<f64>,
    pub channel_names: Vec<String>,
}

impl RSquaredMap {
    pub fn max(&self) -> f64 {
        self.values.max()
    }
}

/// r² map from per-epoch PSD matrices (`channels × frequencies`) of each class.
pub fn rsquared_map(
    psd_class1: &[DMatrix<f64>],
    psd_class2: &[DMatrix<f64>],
    freqs_hz: &[f64],
    channel_names: &[String],
) -> Result<RSquaredMap> {
    ensure!(
        psd_class1.len() >= 2 && psd_class2.len() >= 2,
        "r² map needs at least 2 epochs per class, got {} and {}",
        psd_class1.len(),
        psd_class2.len()
    );
    let shape = (channel_names.len(), freqs_hz.len());
    for p in psd_class1.iter().chain(psd_class2) {
        ensure!(
            p.shape() == shape,
            "PSD matrix is {}x{}, expected {}x{}",
            p.nrows(),
            p.ncols(),
            shape.0,
            shape.1
        );
    }
    let mut values = DMatrix::zeros(shape.0, shape.1);
    let mut a = Vec::with_capacity(psd_class1.len());
    let mut b = Vec::with_capacity(psd_class2.len());
    for m in 0..shape.0 {
        for f in 0..shape.1 {
            a.clear();
            b.clear();
            a.extend(psd_class1.iter().map(|p| p[(m, f)]));
            b.extend(psd_class2.iter().map(|p| p[(m, f)]));
            values[(m, f)] = rsquared(&a, &b)?;
        }
    }
    Ok(RSquaredMap {
        values,
        freqs_hz: freqs_hz.to_vec(),
        channel_names: channel_names.to_vec(),
    })
}

/// Selected channel and frequency band for classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub channel: usize,
    pub channel_name: String,
    pub center_hz: f64,
    /// `center ± 1 Hz`, clipped to the analysis grid.
    pub band: Band,
    /// Grid frequencies inside `band`.
    pub freqs_hz: Vec<f64>,
    pub r_squared: f64,
    /// Set when the map is identically zero and the choice is arbitrary.
    pub degenerate: bool,
}

/// Global argmax of the map, with a ±1 Hz band clipped to the grid.
/// Ties go to the lower channel index, then the lower frequency.
pub fn select_features(map: &RSquaredMap) -> Result<FeatureSpec> {
    let (m, nf) = map.values.shape();
    ensure!(m > 0 && nf > 0, "r² map is empty");
    let mut best = (0, 0);
    for c in 0..m {
        for f in 0..nf {
            if map.values[(c, f)] > map.values[best] {
                best = (c, f);
            }
        }
    }
    let (c, f) = best;
    let center = map.freqs_hz[f];
    let lo = map.freqs_hz[0];
    let hi = map.freqs_hz[nf - 1];
    let band = Band::new((center - 1.0).max(lo), (center + 1.0).min(hi))?;
    let freqs_hz = band
        .indices(&map.freqs_hz)
        .into_iter()
        .map(|k| map.freqs_hz[k])
        .collect();
    Ok(FeatureSpec {
        channel: c,
        channel_name: map.channel_names[c].clone(),
        center_hz: center,
        band,
        freqs_hz,
        r_squared: map.values[best],
        degenerate: map.values.iter().all(|&v| v == 0.0),
    })
}

/// How a rank-sum p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankSumMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankSumResult {
    pub p_value: f64,
    /// Sum of the midranks of `x` in the pooled sample.
    pub rank_sum: f64,
    pub method: RankSumMethod,
}

/// Largest pooled size for which the null distribution is enumerated.
pub const EXACT_MAX_TOTAL: usize = 20;

/// Two-sided Wilcoxon rank-sum test of equal medians.
///
/// Tie-free samples with `n_x + n_y ≤ 20` use the exact permutation
/// distribution; otherwise the normal approximation with tie-corrected
/// variance and continuity correction.
pub fn ranksum_test(x: &[f64], y: &[f64]) -> Result<RankSumResult> {
    ensure!(
        !x.is_empty() && !y.is_empty(),
        "rank-sum test needs two non-empty samples"
    );
    ensure!(
        x.iter().chain(y).all(|v| v.is_finite()),
        "rank-sum test needs finite values"
    );
    let nx = x.len();
    let ny = y.len();
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = midranks(&pooled);
    let w: f64 = ranks[..nx].iter().sum();

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let tie_sum: f64 = sorted
        .chunk_by(|a, b| a == b)
        .map(|g| {
            let t = g.len() as f64;
            t * t * t - t
        })
        .sum();

    if n <= EXACT_MAX_TOTAL && tie_sum == 0.0 {
        return Ok(RankSumResult {
            p_value: exact_p(nx, n, w.round() as usize),
            rank_sum: w,
            method: RankSumMethod::Exact,
        });
    }

    let (nxf, nyf, nf) = (nx as f64, ny as f64, n as f64);
    let expected = nxf * (nf + 1.0) / 2.0;
    let var = nxf * nyf / 12.0 * ((nf + 1.0) - tie_sum / (nf * (nf - 1.0)));
    let p = if var > 0.0 {
        let d = w - expected;
        let z = (d - 0.5 * sign(d)) / var.sqrt();
        erfc(z.abs() / std::f64::consts::SQRT_2)
    } else {
        1.0
    };
    Ok(RankSumResult {
        p_value: p.clamp(f64::MIN_POSITIVE, 1.0),
        rank_sum: w,
        method: RankSumMethod::Normal,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Two-sided exact p-value: twice the smaller tail of the rank-sum null
/// distribution of `nx` ranks drawn from `1..=n`, capped at 1.
fn exact_p(nx: usize, n: usize, w: usize) -> f64 {
    // counts[k][s]: subsets of size k with rank sum s, over ranks seen so far.
    let max_sum = n * (n + 1) / 2;
    let mut counts = vec![vec![0u64; max_sum + 1]; nx + 1];
    counts[0][0] = 1;
    for r in 1..=n {
        for k in (1..=nx.min(r)).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                upper[0][s] += lower[k - 1][s - r];
            }
        }
    }
    let dist = &counts[nx];
    let total: u64 = dist.iter().sum();
    let lower: u64 = dist[..=w.min(max_sum)].iter().sum();
    let upper: u64 = dist[w.min(max_sum + 1)..].iter().sum();
    let tail = lower.min(upper) as f64 / total as f64;
    (2.0 * tail).min(1.0)
}

/// p-value of [`ranksum_test`].
pub fn ranksum(x: &[f64], y: &[f64]) -> Result<f64> {
    ranksum_test(x, y).map(|r| r.p_value)
}

/// A directed edge whose band PDC differs between classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub from_name: String,
    pub to_name: String,
    pub p_value: f64,
    pub predominant: ClassLabel,
    pub median_class1: f64,
    pub median_class2: f64,
}

/// Screening result for one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSignificance {
    pub edges: Vec<Edge>,
    pub band: Band,
    pub alpha_level: f64,
    /// Ordered channel pairs tested.
    pub n_tests: usize,
}

impl EdgeSignificance {
    /// Edge count expected by chance alone (no multiple-comparison correction).
    pub fn expected_false_edges(&self) -> f64 {
        self.alpha_level.min(1.0) * self.n_tests as f64
    }

    pub fn directions(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.from, e.to)).collect()
    }

    /// `from,to,band_low,band_high,p_value,predominant` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("from,to,band_low,band_high,p_value,predominant\n");
        for e in &self.edges {
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.from_name,
                e.to_name,
                format_value(self.band.low_hz),
                format_value(self.band.high_hz),
                format_value(e.p_value),
                e.predominant.code()
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|err| Error::io(path, err))?;
        f.write_all(text.as_bytes()).map_err(|err| Error::io(path, err))
    }
}

/// Per-epoch band statistic: mean of `|π_{to←from}|` over in-band grid points.
fn band_values(tensors: &[PdcTensor], to: usize, from: usize, idx: &[usize]) -> Vec<f64> {
    tensors.iter().map(|t| t.band_mean(to, from, idx)).collect()
}

/// Tests every ordered pair `from ≠ to` and returns all of them, unfiltered.
pub fn pair_statistics(pdc_class1: &[PdcTensor], pdc_class2: &[PdcTensor], band: &Band) -> Result<Vec<Edge>> {
    ensure!(
        pdc_class1.len() >= 2 && pdc_class2.len() >= 2,
        "edge screening needs at least 2 epochs per class, got {} and {}",
        pdc_class1.len(),
        pdc_class2.len()
    );
    let reference = &pdc_class1[0];
    ensure!(
        pdc_class1
            .iter()
            .chain(pdc_class2)
            .all(|t| { t.n_channels() == reference.n_channels() && t.freqs_hz() == reference.freqs_hz() }),
        "PDC tensors differ in channel count or frequency grid"
    );
    let idx = band.indices(reference.freqs_hz());
    if idx.is_empty() {
        return Err(Error::Range(format!("band {band} contains no grid frequency")));
    }
    let names = reference.channel_names();
    let m = reference.n_channels();
    let mut edges = Vec::with_capacity(m * m.saturating_sub(1));
    for from in 0..m {
        for to in 0..m {
            if from == to {
                continue;
            }
            let mut v1 = band_values(pdc_class1, to, from, &idx);
            let mut v2 = band_values(pdc_class2, to, from, &idx);
            let p_value = ranksum(&v1, &v2)?;
            let mean1 = mean(&v1);
            let mean2 = mean(&v2);
            let median_class1 = median(&mut v1);
            let median_class2 = median(&mut v2);
            let predominant = if median_class1 != median_class2 {
                if median_class1 > median_class2 {
                    ClassLabel::Class1
                } else {
                    ClassLabel::Class2
                }
            } else if mean2 > mean1 {
                ClassLabel::Class2
            } else {
                ClassLabel::Class1
            };
            edges.push(Edge {
                from,
                to,
                from_name: names[from].clone(),
                to_name: names[to].clone(),
                p_value,
                predominant,
                median_class1,
                median_class2,
            });
        }
    }
    Ok(edges)
}

/// Directed edges whose per-epoch band PDC differs between classes at
/// `p < alpha_level`, each labelled with the class of larger median.
///
/// `alpha_level ≥ 1` keeps every pair.
pub fn screen_edges(
    pdc_class1: &[PdcTensor],
    pdc_class2: &[PdcTensor],
    band: &Band,
    alpha_level: f64,
) -> Result<EdgeSignificance> {
    ensure!(
        alpha_level > 0.0,
        "significance level must be positive, got {alpha_level}"
    );
    let all = pair_statistics(pdc_class1, pdc_class2, band)?;
    let n_tests = all.len();
    let edges = all
        .into_iter()
        .filter(|e| alpha_level >= 1.0 || e.p_value < alpha_level)
        .collect();
    Ok(EdgeSignificance {
        edges,
        band: *band,
        alpha_level,
        n_tests,
    })
}
