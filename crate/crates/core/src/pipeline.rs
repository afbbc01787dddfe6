//! Per-epoch stages of both analysis tracks, composed from the other modules.
//!
//! Work is spread over the rayon pool; every reduction consumes results in
//! epoch order, so outputs do not depend on the number of workers.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::burg::{burg_fit, burg_psd, select_order_reflection};
use crate::classification::{build_feature_vectors, cross_validate, CvConfig, CvResult};
use crate::connectivity::{flow_map, pdc, FlowMap, PdcTensor};
use crate::discriminability::{
    rsquared_map, screen_edges, select_features, EdgeSignificance, FeatureSpec, RSquaredMap,
};
use crate::error::{ensure, Error, Result};
use crate::grid::Band;
use crate::mvar::{fit_mvar, select_order_aic};
use crate::signal_io::{ClassLabel, EpochSet};
use crate::stats::median;

/// Burg order handling for the power track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurgSettings {
    /// Used for every channel unless `auto_select` is set.
    pub order: usize,
    pub auto_select: bool,
    /// Deepest order scanned by reflection-coefficient selection.
    pub scan_order: usize,
    pub threshold: f64,
}

impl Default for BurgSettings {
    fn default() -> Self {
        BurgSettings {
            order: 12,
            auto_select: false,
            scan_order: 20,
            threshold: 0.1,
        }
    }
}

/// Per-channel Burg orders: the median (rounded down) of the per-epoch
/// reflection-coefficient choices, or the fixed order.
pub fn channel_burg_orders(epochs: &EpochSet, settings: &BurgSettings) -> Result<Vec<usize>> {
    let m = epochs.n_channels();
    if !settings.auto_select {
        ensure!(settings.order >= 1, "Burg order must be at least 1");
        return Ok(vec![settings.order; m]);
    }
    (0..m)
        .into_par_iter()
        .map(|c| {
            let mut picks = epochs
                .epochs
                .iter()
                .map(|e| {
                    select_order_reflection(&e.channel(c), settings.scan_order, settings.threshold).map(|o| o as f64)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(median(&mut picks).floor() as usize)
        })
        .collect()
}

/// Burg PSD of every epoch as a `channels × frequencies` matrix.
pub fn epoch_psds(epochs: &EpochSet, freqs_hz: &[f64], orders: &[usize]) -> Result<Vec<DMatrix<f64>>> {
    ensure!(
        orders.len() == epochs.n_channels(),
        "{} Burg orders for {} channels",
        orders.len(),
        epochs.n_channels()
    );
    let fs = epochs.sample_rate_hz;
    epochs
        .epochs
        .par_iter()
        .map(|e| {
            let mut out = DMatrix::zeros(e.n_channels(), freqs_hz.len());
            for (c, &order) in orders.iter().enumerate() {
                let model = burg_fit(&e.channel(c), order)?;
                let psd = burg_psd(&model, freqs_hz, fs)?;
                for (f, v) in psd.into_iter().enumerate() {
                    out[(c, f)] = v;
                }
            }
            Ok(out)
        })
        .collect()
}

/// Scale of the PSD values entering the r² map.
///
/// AR spectra of a strong rhythm vary far more in peak height than on the
/// flanks, so on a linear scale r² tends to peak beside the rhythm rather
/// than on it. The decibel scale removes that effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerScale {
    Linear,
    #[default]
    Decibel,
}

impl PowerScale {
    pub fn apply(self, psd: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            PowerScale::Linear => psd.clone(),
            PowerScale::Decibel => psd.map(|v| 10.0 * v.log10()),
        }
    }
}

impl std::str::FromStr for PowerScale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(PowerScale::Linear),
            "db" | "decibel" => Ok(PowerScale::Decibel),
            other => Err(format!("unknown power scale '{other}' (expected linear or db)")),
        }
    }
}

/// Everything the power track produces.
#[derive(Debug, Clone)]
pub struct PowerTrack {
    pub burg_orders: Vec<usize>,
    pub rsq: RSquaredMap,
    pub feature: FeatureSpec,
    pub cv: CvResult,
}

/// PSD per epoch → r² map → feature band → cross-validated SVM accuracy.
/// `scale` applies to the r² map only; SVM features stay linear PSD.
pub fn power_track(
    epochs: &EpochSet,
    freqs_hz: &[f64],
    burg: &BurgSettings,
    scale: PowerScale,
    cv: &CvConfig,
) -> Result<PowerTrack> {
    epochs.require_both_classes(2)?;
    let burg_orders = channel_burg_orders(epochs, burg)?;
    let psds = epoch_psds(epochs, freqs_hz, &burg_orders)?;
    let (mut c1, mut c2) = (Vec::new(), Vec::new());
    for (e, p) in epochs.epochs.iter().zip(psds) {
        match e.label {
            ClassLabel::Class1 => c1.push(scale.apply(&p)),
            ClassLabel::Class2 => c2.push(scale.apply(&p)),
        }
    }
    let rsq = rsquared_map(&c1, &c2, freqs_hz, &epochs.channel_names)?;
    let feature = select_features(&rsq)?;
    let (features, labels) = build_feature_vectors(epochs, &feature, burg_orders[feature.channel])?;
    let cv = cross_validate(&features, &labels, cv)?;
    Ok(PowerTrack {
        burg_orders,
        rsq,
        feature,
        cv,
    })
}

/// MVAR order handling for the connectivity track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvarSettings {
    /// Largest order considered by AIC.
    pub max_order: usize,
    /// Skips AIC and uses this order for every epoch.
    pub fixed_order: Option<usize>,
}

impl Default for MvarSettings {
    fn default() -> Self {
        MvarSettings {
            max_order: 10,
            fixed_order: None,
        }
    }
}

/// PDC of one successfully fitted epoch.
#[derive(Debug, Clone)]
pub struct EpochFit {
    pub epoch: usize,
    pub label: ClassLabel,
    pub order: usize,
    pub pdc: PdcTensor,
}

/// An epoch left out of the connectivity statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub epoch: usize,
    pub reason: String,
}

/// AIC order, MVAR fit and PDC per epoch. Epochs whose fit fails are
/// returned as exclusions instead of aborting the run.
pub fn epoch_connectivity(
    epochs: &EpochSet,
    freqs_hz: &[f64],
    settings: &MvarSettings,
) -> (Vec<EpochFit>, Vec<Exclusion>) {
    let fs = epochs.sample_rate_hz;
    let results: Vec<Result<EpochFit>> = epochs
        .epochs
        .par_iter()
        .enumerate()
        .map(|(k, e)| {
            let order = match settings.fixed_order {
                Some(p) => p,
                None => select_order_aic(e, settings.max_order)?,
            };
            let model = fit_mvar(e, order)?.with_channels(epochs.channel_names.clone())?;
            Ok(EpochFit {
                epoch: k,
                label: e.label,
                order,
                pdc: pdc(&model, freqs_hz, fs)?,
            })
        })
        .collect();
    let mut fits = Vec::new();
    let mut excluded = Vec::new();
    for (k, r) in results.into_iter().enumerate() {
        match r {
            Ok(fit) => fits.push(fit),
            Err(e) => excluded.push(Exclusion {
                epoch: k,
                reason: e.to_string(),
            }),
        }
    }
    (fits, excluded)
}

/// Screening and flow maps for one band.
#[derive(Debug, Clone)]
pub struct BandConnectivity {
    pub name: String,
    pub significance: EdgeSignificance,
    /// Class1 then Class2.
    pub flows: [FlowMap; 2],
}

#[derive(Debug, Clone)]
pub struct ConnectivityTrack {
    pub orders: Vec<usize>,
    pub excluded: Vec<Exclusion>,
    pub bands: Vec<BandConnectivity>,
}

/// Per-epoch PDC → edge screening and per-class flow maps for every band.
pub fn connectivity_track(
    epochs: &EpochSet,
    freqs_hz: &[f64],
    settings: &MvarSettings,
    bands: &[(String, Band)],
    alpha_level: f64,
) -> Result<ConnectivityTrack> {
    epochs.require_both_classes(2)?;
    let (fits, excluded) = epoch_connectivity(epochs, freqs_hz, settings);
    let split = |class| -> Vec<PdcTensor> {
        fits.iter()
            .filter(|f| f.label == class)
            .map(|f| f.pdc.clone())
            .collect()
    };
    let c1 = split(ClassLabel::Class1);
    let c2 = split(ClassLabel::Class2);
    if c1.len() < 2 || c2.len() < 2 {
        let reason = excluded.first().map_or("none", |x| x.reason.as_str());
        return Err(Error::Contract(format!(
            "{} of {} epochs failed the MVAR fit, leaving {} and {} per class (first failure: {reason})",
            excluded.len(),
            epochs.len(),
            c1.len(),
            c2.len()
        )));
    }
    let mut out = Vec::with_capacity(bands.len());
    for (name, band) in bands {
        let significance = screen_edges(&c1, &c2, band, alpha_level)?;
        let flows = [
            flow_map(&c1, band, ClassLabel::Class1)?,
            flow_map(&c2, band, ClassLabel::Class2)?,
        ];
        out.push(BandConnectivity {
            name: name.clone(),
            significance,
            flows,
        });
    }
    Ok(ConnectivityTrack {
        orders: fits.iter().map(|f| f.order).collect(),
        excluded,
        bands: out,
    })
}
