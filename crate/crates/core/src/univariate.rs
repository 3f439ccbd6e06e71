//! The univariate variance-ratio scan.
//!
//! For each `t` in the dyadic grid the statistic compares the mean squares of
//! the first and last `t` observations,
//!
//! ```text
//! S_t = max(v1/v2, v2/v1) - 1,   v1 = (1/t) sum_{i<=t} X_i^2,   v2 = (1/t) sum_{i<=t} X_{n-i+1}^2,
//! ```
//!
//! and the test rejects when `S_t > lambda (sqrt(ll/t) v ll/t)` for some `t`,
//! where `ll = ln ln(8n)`. The statistic is scale-free, so no noise level is
//! needed. Ties at the threshold do not reject.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{dyadic_grid, rate_uni};
use crate::series::Series;

fn require_univariate(x: &Series) -> Result<()> {
    if x.p() != 1 {
        return Err(invalid(format!("univariate test needs p = 1, got p = {}", x.p())));
    }
    Ok(())
}

fn ratio_stat(v1: f64, v2: f64) -> f64 {
    (v1 / v2).max(v2 / v1) - 1.0
}

/// `S_t` for a single window length.
pub fn variance_ratio_stat(x: &Series, t: usize) -> Result<f64> {
    require_univariate(x)?;
    if t < 1 || t > x.n() / 2 {
        return Err(invalid(format!("t = {t} must lie in [1, {}]", x.n() / 2)));
    }
    let v = x.values();
    let n = x.n();
    let v1: f64 = v[..t].iter().map(|a| a * a).sum::<f64>() / t as f64;
    let v2: f64 = v[n - t..].iter().map(|a| a * a).sum::<f64>() / t as f64;
    if v1 == 0.0 || v2 == 0.0 {
        return Err(Error::DegenerateData(format!(
            "zero empirical variance in the {} window of length {t}",
            if v1 == 0.0 { "leading" } else { "trailing" }
        )));
    }
    Ok(ratio_stat(v1, v2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Evaluated,
    /// One window has zero mean square and the other does not; `S_t = +inf`.
    OneSidedZero,
    /// Both windows are identically zero; the cell is skipped.
    BothZero,
}

/// Grid cell statistics before a threshold multiplier is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct UniScan {
    pub n: usize,
    pub cells: Vec<UniScanCell>,
    /// Squared observations accumulated while scanning.
    pub accumulations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniScanCell {
    pub t: usize,
    pub statistic: f64,
    pub rate: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniCell {
    pub t: usize,
    /// `+inf` for one-sided zero windows, `NaN` for skipped cells.
    pub statistic: f64,
    pub threshold: f64,
    pub triggered: bool,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniTestReport {
    pub reject: bool,
    pub lambda: f64,
    pub cells: Vec<UniCell>,
    pub accumulations: u64,
}

impl UniTestReport {
    /// The first triggering cell, if any.
    pub fn trigger(&self) -> Option<&UniCell> {
        self.cells.iter().find(|c| c.triggered)
    }
}

/// Evaluates `S_t` on the whole grid from running sums of squares.
pub fn scan_univariate(x: &Series) -> Result<UniScan> {
    require_univariate(x)?;
    let n = x.n();
    let v = x.values();
    let grid = dyadic_grid(n)?;
    let mut cells = Vec::with_capacity(grid.len());
    let (mut head, mut tail) = (0.0_f64, 0.0_f64);
    let mut done = 0usize;
    let mut accumulations = 0u64;
    for &t in &grid {
        while done < t {
            head += v[done] * v[done];
            tail += v[n - 1 - done] * v[n - 1 - done];
            done += 1;
            accumulations += 2;
        }
        let (statistic, status) = match (head == 0.0, tail == 0.0) {
            (false, false) => (ratio_stat(head, tail), CellStatus::Evaluated),
            (true, true) => (f64::NAN, CellStatus::BothZero),
            _ => (f64::INFINITY, CellStatus::OneSidedZero),
        };
        cells.push(UniScanCell {
            t,
            statistic,
            rate: rate_uni(n, t)?,
            status,
        });
    }
    Ok(UniScan {
        n,
        cells,
        accumulations,
    })
}

impl UniScan {
    /// `max_t S_t / rate_t` over evaluated cells; the smallest `lambda` that
    /// does not reject. `None` when every cell is skipped.
    pub fn max_standardized(&self) -> Option<f64> {
        self.cells
            .iter()
            .filter(|c| c.status != CellStatus::BothZero)
            .map(|c| c.statistic / c.rate)
            .reduce(f64::max)
    }

    pub fn report(&self, lambda: f64) -> UniTestReport {
        let cells: Vec<UniCell> = self
            .cells
            .iter()
            .map(|c| {
                let threshold = lambda * c.rate;
                UniCell {
                    t: c.t,
                    statistic: c.statistic,
                    threshold,
                    triggered: c.status != CellStatus::BothZero && c.statistic > threshold,
                    status: c.status,
                }
            })
            .collect();
        UniTestReport {
            reject: cells.iter().any(|c| c.triggered),
            lambda,
            cells,
            accumulations: self.accumulations,
        }
    }
}

/// Runs the scan and applies threshold multiplier `lambda`.
pub fn test_univariate(x: &Series, lambda: f64) -> Result<UniTestReport> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda must be positive"));
    }
    Ok(scan_univariate(x)?.report(lambda))
}
