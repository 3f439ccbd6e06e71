//! A uniform handle over the four tests, used by calibration and simulation.

use serde::Serialize;

use crate::error::Result;
use crate::multivariate::{scan_adaptive, scan_adaptive_sdp, scan_oracle, ScanOptions};
use crate::series::Series;
use crate::univariate::scan_univariate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum Procedure {
    Univariate,
    Oracle { s: usize, sigma_sq: f64 },
    Adaptive,
    AdaptiveSdp,
}

/// A procedure together with its solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scanner {
    pub procedure: Procedure,
    pub options: ScanOptions,
}

impl Scanner {
    pub fn new(procedure: Procedure) -> Self {
        Self {
            procedure,
            options: ScanOptions::default(),
        }
    }

    pub fn with_options(mut self, options: ScanOptions) -> Self {
        self.options = options;
        self
    }

    /// `max` over cells of `statistic / (noise_scale * rate)`, the smallest
    /// threshold multiplier at which the test does not reject.
    ///
    /// `-inf` when no cell could be evaluated (univariate data that is zero
    /// at both ends).
    pub fn max_standardized(&self, x: &Series) -> Result<f64> {
        let m = match self.procedure {
            Procedure::Univariate => scan_univariate(x)?.max_standardized(),
            Procedure::Oracle { s, sigma_sq } => scan_oracle(x, s, sigma_sq, &self.options)?.max_standardized(),
            Procedure::Adaptive => scan_adaptive(x, &self.options)?.max_standardized(),
            Procedure::AdaptiveSdp => scan_adaptive_sdp(x, &self.options)?.max_standardized(),
        };
        Ok(m.unwrap_or(f64::NEG_INFINITY))
    }

    /// Decision at multiplier `lambda`.
    pub fn rejects(&self, x: &Series, lambda: f64) -> Result<bool> {
        Ok(self.max_standardized(x)? > lambda)
    }
}
