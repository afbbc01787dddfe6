//! Frequency grids and analysis bands.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Inclusive frequency band in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Band {
    pub const ALPHA: Band = Band {
        low_hz: 8.0,
        high_hz: 12.0,
    };
    pub const BETA: Band = Band {
        low_hz: 13.0,
        high_hz: 30.0,
    };

    pub fn new(low_hz: f64, high_hz: f64) -> Result<Self> {
        ensure!(
            low_hz.is_finite() && high_hz.is_finite() && low_hz <= high_hz,
            "band [{low_hz}, {high_hz}] is not an ordered finite interval"
        );
        Ok(Band { low_hz, high_hz })
    }

    pub fn contains(&self, f_hz: f64) -> bool {
        // Tolerate grid points produced by repeated addition of the step.
        const EPS: f64 = 1e-9;
        f_hz >= self.low_hz - EPS && f_hz <= self.high_hz + EPS
    }

    /// Indices of `freqs` falling inside the band.
    pub fn indices(&self, freqs: &[f64]) -> Vec<usize> {
        freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| self.contains(f))
            .map(|(k, _)| k)
            .collect()
    }
}

impl std::fmt::Display for Band {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{} Hz", self.low_hz, self.high_hz)
    }
}

/// Evenly spaced, inclusive frequency grid `low, low + step, ..., high`.
///
/// The default is 8 to 30 Hz at 1 Hz spacing (23 points).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqGrid {
    pub low_hz: f64,
    pub high_hz: f64,
    pub step_hz: f64,
}

impl Default for FreqGrid {
    fn default() -> Self {
        FreqGrid {
            low_hz: 8.0,
            high_hz: 30.0,
            step_hz: 1.0,
        }
    }
}

impl FreqGrid {
    pub fn new(low_hz: f64, high_hz: f64, step_hz: f64) -> Result<Self> {
        ensure!(
            low_hz.is_finite() && high_hz.is_finite() && low_hz >= 0.0 && low_hz < high_hz,
            "grid requires 0 <= low < high, got [{low_hz}, {high_hz}]"
        );
        ensure!(step_hz > 0.0 && step_hz.is_finite(), "grid step must be positive");
        Ok(FreqGrid {
            low_hz,
            high_hz,
            step_hz,
        })
    }

    pub fn freqs(&self) -> Vec<f64> {
        let n = ((self.high_hz - self.low_hz) / self.step_hz + 1e-9).floor() as usize + 1;
        (0..n).map(|k| self.low_hz + k as f64 * self.step_hz).collect()
    }

    pub fn len(&self) -> usize {
        self.freqs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
