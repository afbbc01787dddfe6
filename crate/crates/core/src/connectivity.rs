//! Frequency-domain transfer structure, partial directed coherence, and
//! inflow/outflow maps.
//!
//! For an MVAR model the transfer structure is
//! `Ā(f) = I - Σ_k A_k exp(-2πi·(f/fs)·k)` and the PDC from `j` to `i` is
//! `Ā_ij(f) / sqrt(ā_jᴴ(f) ā_j(f))`, with `ā_j` the `j`-th column. Each source
//! column therefore has unit quadratic mass at every frequency.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::grid::Band;
use crate::mvar::MvarModel;
use crate::signal_io::{format_value, ClassLabel};
use crate::stats::median;

/// `Ā(f)` at one frequency.
pub fn transfer_matrix(model: &MvarModel, f_hz: f64, sample_rate_hz: f64) -> Result<DMatrix<Complex64>> {
    check_frequency(f_hz, sample_rate_hz)?;
    Ok(transfer_unchecked(model, f_hz / sample_rate_hz))
}

fn transfer_unchecked(model: &MvarModel, f_norm: f64) -> DMatrix<Complex64> {
    let m = model.n_channels();
    let mut out = DMatrix::<Complex64>::identity(m, m);
    for (k, a) in model.coeffs().iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -2.0 * PI * f_norm * (k + 1) as f64);
        for j in 0..m {
            for i in 0..m {
                out[(i, j)] -= phase * a[(i, j)];
            }
        }
    }
    out
}

fn check_frequency(f_hz: f64, sample_rate_hz: f64) -> Result<()> {
    ensure!(sample_rate_hz > 0.0, "sample rate must be positive");
    let nyquist = sample_rate_hz / 2.0;
    if !(f_hz >= 0.0 && f_hz < nyquist) {
        return Err(Error::Range(format!("frequency {f_hz} Hz outside [0, {nyquist}) Hz")));
    }
    Ok(())
}

/// PDC magnitudes `|π_{i←j}(f)|` on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PdcWire", into = "PdcWire")]
pub struct PdcTensor {
    values: Vec<f64>,
    n_channels: usize,
    freqs_hz: Vec<f64>,
    channel_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct PdcWire {
    freqs: Vec<f64>,
    channels: Vec<String>,
    /// Row-major over `(i, j, f)`.
    values: Vec<f64>,
}

impl From<PdcTensor> for PdcWire {
    fn from(t: PdcTensor) -> Self {
        PdcWire {
            freqs: t.freqs_hz,
            channels: t.channel_names,
            values: t.values,
        }
    }
}

impl TryFrom<PdcWire> for PdcTensor {
    type Error = Error;

    fn try_from(w: PdcWire) -> Result<Self> {
        PdcTensor::from_parts(w.values, w.freqs, w.channels)
    }
}

impl PdcTensor {
    /// Builds a tensor from row-major `(i, j, f)` values.
    pub fn from_parts(values: Vec<f64>, freqs_hz: Vec<f64>, channel_names: Vec<String>) -> Result<Self> {
        let m = channel_names.len();
        ensure!(
            values.len() == m * m * freqs_hz.len(),
            "{} values for {m} channels and {} frequencies",
            values.len(),
            freqs_hz.len()
        );
        Ok(PdcTensor {
            values,
            n_channels: m,
            freqs_hz,
            channel_names,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn index(&self, i: usize, j: usize, f: usize) -> usize {
        (i * self.n_channels + j) * self.freqs_hz.len() + f
    }

    /// `|π_{to←from}|` at grid index `f`.
    pub fn get(&self, to: usize, from: usize, f: usize) -> f64 {
        self.values[self.index(to, from, f)]
    }

    /// Mean of `|π_{to←from}|` over the given grid indices.
    pub fn band_mean(&self, to: usize, from: usize, freq_idx: &[usize]) -> f64 {
        freq_idx.iter().map(|&f| self.get(to, from, f)).sum::<f64>() / freq_idx.len() as f64
    }

    fn same_layout(&self, other: &PdcTensor) -> bool {
        self.n_channels == other.n_channels && self.freqs_hz == other.freqs_hz
    }
}

/// PDC of `model` at every grid frequency.
pub fn pdc(model: &MvarModel, freqs_hz: &[f64], sample_rate_hz: f64) -> Result<PdcTensor> {
    ensure!(!freqs_hz.is_empty(), "frequency grid is empty");
    ensure!(
        freqs_hz.windows(2).all(|w| w[0] < w[1]),
        "frequency grid must be strictly increasing"
    );
    for &f in freqs_hz {
        check_frequency(f, sample_rate_hz)?;
    }
    let m = model.n_channels();
    let nf = freqs_hz.len();
    let mut values = vec![0.0; m * m * nf];
    for (fi, &f) in freqs_hz.iter().enumerate() {
        let abar = transfer_unchecked(model, f / sample_rate_hz);
        for j in 0..m {
            let col = abar.column(j);
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > f64::MIN_POSITIVE) {
                return Err(Error::Numerical(format!(
                    "column {j} of the transfer matrix vanishes at {f} Hz"
                )));
            }
            for i in 0..m {
                values[(i * m + j) * nf + fi] = col[i].norm() / norm;
            }
        }
    }
    PdcTensor::from_parts(values, freqs_hz.to_vec(), model.channels().to_vec())
}

fn band_indices(tensors: &[PdcTensor], band: &Band) -> Result<Vec<usize>> {
    ensure!(!tensors.is_empty(), "at least one PDC tensor is required");
    ensure!(
        tensors.iter().all(|t| t.same_layout(&tensors[0])),
        "PDC tensors differ in channel count or frequency grid"
    );
    let idx = band.indices(tensors[0].freqs_hz());
    if idx.is_empty() {
        return Err(Error::Range(format!("band {band} contains no grid frequency")));
    }
    Ok(idx)
}

/// Median over all `(epoch, in-band frequency)` pairs, per direction.
///
/// Entry `(i, j)` is the `j → i` value; the diagonal holds self-loops and is
/// reported as computed.
pub fn band_median_pdc(per_epoch: &[PdcTensor], band: &Band) -> Result<DMatrix<f64>> {
    let idx = band_indices(per_epoch, band)?;
    let m = per_epoch[0].n_channels();
    let mut buf = Vec::with_capacity(per_epoch.len() * idx.len());
    Ok(DMatrix::from_fn(m, m, |i, j| {
        buf.clear();
        for t in per_epoch {
            buf.extend(idx.iter().map(|&f| t.get(i, j, f)));
        }
        median(&mut buf)
    }))
}

/// Per-`(i, j, f)` median over epochs.
pub fn epoch_median(per_epoch: &[PdcTensor]) -> Result<PdcTensor> {
    ensure!(!per_epoch.is_empty(), "at least one PDC tensor is required");
    ensure!(
        per_epoch.iter().all(|t| t.same_layout(&per_epoch[0])),
        "PDC tensors differ in channel count or frequency grid"
    );
    let first = &per_epoch[0];
    let mut buf = Vec::with_capacity(per_epoch.len());
    let values = (0..first.values.len())
        .map(|k| {
            buf.clear();
            buf.extend(per_epoch.iter().map(|t| t.values[k]));
            median(&mut buf)
        })
        .collect();
    PdcTensor::from_parts(values, first.freqs_hz.clone(), first.channel_names.clone())
}

/// Per-channel information outflow and inflow within one band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    pub channels: Vec<String>,
    pub outflow: Vec<f64>,
    pub inflow: Vec<f64>,
    pub band: Band,
    pub class_label: ClassLabel,
    /// Number of grid frequencies summed over.
    pub n_freqs: usize,
}

impl FlowMap {
    /// Writes `channel,outflow,inflow` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("channel,outflow,inflow\n");
        for (k, name) in self.channels.iter().enumerate() {
            text.push_str(&format!(
                "{name},{},{}\n",
                format_value(self.outflow[k]),
                format_value(self.inflow[k])
            ));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Squared epoch-median PDC summed over in-band frequencies and over the
/// other channels: `outflow[j] = Σ_{i≠j} Σ_f m_ij(f)²`,
/// `inflow[i] = Σ_{j≠i} Σ_f m_ij(f)²`.
pub fn flow_map(per_epoch: &[PdcTensor], band: &Band, class_label: ClassLabel) -> Result<FlowMap> {
    flow_map_filtered(per_epoch, band, class_label, |_, _| true)
}

/// [`flow_map`] restricted to the listed `(from, to)` directions.
pub fn flow_map_on_edges(
    per_epoch: &[PdcTensor],
    band: &Band,
    class_label: ClassLabel,
    edges: &[(usize, usize)],
) -> Result<FlowMap> {
    flow_map_filtered(per_epoch, band, class_label, |from, to| edges.contains(&(from, to)))
}

fn flow_map_filtered(
    per_epoch: &[PdcTensor],
    band: &Band,
    class_label: ClassLabel,
    keep: impl Fn(usize, usize) -> bool,
) -> Result<FlowMap> {
    let idx = band_indices(per_epoch, band)?;
    let med = epoch_median(per_epoch)?;
    let m = med.n_channels();
    let mut outflow = vec![0.0; m];
    let mut inflow = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            if i == j || !keep(j, i) {
                continue;
            }
            let mass: f64 = idx.iter().map(|&f| med.get(i, j, f).powi(2)).sum();
            outflow[j] += mass;
            inflow[i] += mass;
        }
    }
    Ok(FlowMap {
        channels: med.channel_names().to_vec(),
        outflow,
        inflow,
        band: *band,
        class_label,
        n_freqs: idx.len(),
    })
}
