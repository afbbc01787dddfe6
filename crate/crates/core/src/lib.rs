//! Two-class motor-imagery EEG analysis.
//!
//! Two tracks share one data model:
//!
//! * spectral power: Burg AR spectra per epoch, r² discriminability maps,
//!   feature selection, and an RBF-kernel SVM evaluated by repeated random
//!   splits;
//! * connectivity: per-epoch multivariate AR fits, partial directed coherence,
//!   Wilcoxon rank-sum screening of directed edges, and inflow/outflow maps.
//!
//! The [`synth`] module generates MVAR data with known coupling so every stage
//! can be checked against ground truth.

pub mod burg;
pub mod classification;
pub mod connectivity;
pub mod discriminability;
pub mod error;
pub mod grid;
mod linalg;
pub mod mvar;
pub mod pipeline;
pub mod preprocess;
pub mod signal_io;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
