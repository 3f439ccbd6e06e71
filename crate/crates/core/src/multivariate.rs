//! Covariance changepoint scans.
//!
//! Three variants share one cell layout over `t` in the dyadic grid and `s`
//! in a sparsity set:
//!
//! * **oracle**: known sparsity `s` and noise level `sigma^2`; the statistic
//!   `S_{t,s} = lambda_max^s(Sigma_hat_{1,t} - Sigma_hat_{2,t})` is compared
//!   with `lambda sigma^2 r(p, n, s, t)`.
//! * **adaptive**: scans every `s` in `{1, 2, 4, ...}` with `gamma(s) <= n`,
//!   using the noise estimate `sigma_hat_s^2` from the first and last
//!   `ceil(gamma(s))` rows.
//! * **adaptive-sdp**: replaces `S_{t,s}` by the certified lower end of the
//!   semidefinite relaxation, the noise estimate by the max-abs entry of the
//!   end windows of length `ceil(ln(e p))`, and the rate by `h(p, n, s, t)`.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::{dyadic_grid, gamma, rate_h, rate_r, sparsity_grid};
use crate::matrix::SymMatrix;
use crate::sdp::{relaxed_sparse_eigmax_with, RelaxOptions};
use crate::series::{prefix_covariance, suffix_covariance, EndMoments, Series};
use crate::sparse_eig::{sparse_abs_eigmax_with_budget, DEFAULT_BUDGET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Oracle,
    Adaptive,
    AdaptiveSdp,
}

/// Solver settings shared by the scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Support-enumeration budget for the exact statistic.
    pub budget: u64,
    pub relax: RelaxOptions,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            relax: RelaxOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// `gamma(s) > n`, excluded by the adaptive scan.
    GammaExceedsN,
    /// `ceil(gamma(s)) > floor(n/2)`: the two noise windows would overlap.
    NoiseWindowTooLong,
    /// The noise estimate is exactly zero.
    ZeroNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SkippedCell {
    pub t: usize,
    pub s: usize,
    pub reason: SkipReason,
}

/// A grid cell before a threshold multiplier is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanCell {
    pub t: usize,
    pub s: usize,
    pub statistic: f64,
    pub noise_scale: f64,
    pub rate: f64,
    /// `false` only for relaxation cells whose solver hit the iteration cap.
    pub converged: bool,
}

impl ScanCell {
    pub fn standardized(&self) -> f64 {
        self.statistic / (self.noise_scale * self.rate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiScan {
    pub variant: Variant,
    pub cells: Vec<ScanCell>,
    pub skipped: Vec<SkippedCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiCell {
    pub t: usize,
    pub s: usize,
    pub statistic: f64,
    pub noise_scale: f64,
    pub threshold: f64,
    pub triggered: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiTestReport {
    pub reject: bool,
    pub variant: Variant,
    pub lambda: f64,
    pub cells: Vec<MultiCell>,
    pub skipped: Vec<SkippedCell>,
}

impl MultiTestReport {
    /// The first triggering cell in `(t, s)` order.
    pub fn trigger(&self) -> Option<&MultiCell> {
        self.cells.iter().find(|c| c.triggered)
    }
}

impl MultiScan {
    /// `max` over cells of `statistic / (noise_scale * rate)`.
    pub fn max_standardized(&self) -> Option<f64> {
        self.cells.iter().map(ScanCell::standardized).reduce(f64::max)
    }

    pub fn report(&self, lambda: f64) -> MultiTestReport {
        let cells: Vec<MultiCell> = self
            .cells
            .iter()
            .map(|c| {
                let threshold = lambda * c.noise_scale * c.rate;
                MultiCell {
                    t: c.t,
                    s: c.s,
                    statistic: c.statistic,
                    noise_scale: c.noise_scale,
                    threshold,
                    triggered: c.statistic > threshold,
                    converged: c.converged,
                }
            })
            .collect();
        MultiTestReport {
            reject: cells.iter().any(|c| c.triggered),
            variant: self.variant,
            lambda,
            cells,
            skipped: self.skipped.clone(),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid("lambda must be positive and finite"));
    }
    Ok(())
}

fn check_sparsity(p: usize, s: usize) -> Result<()> {
    if s < 1 || s > p {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, p = {p}]")));
    }
    Ok(())
}

/// `S_{t,s} = lambda_max^s(Sigma_hat_{1,t} - Sigma_hat_{2,t})`.
pub fn cov_cusum_stat(x: &Series, t: usize, s: usize) -> Result<f64> {
    cov_cusum_stat_with_budget(x, t, s, DEFAULT_BUDGET)
}

pub fn cov_cusum_stat_with_budget(x: &Series, t: usize, s: usize, budget: u64) -> Result<f64> {
    check_sparsity(x.p(), s)?;
    let d = prefix_covariance(x, t)?.sub(&suffix_covariance(x, t)?)?;
    Ok(sparse_abs_eigmax_with_budget(&d, s, budget)?.value)
}

fn noise_window_s(x: &Series, s: usize) -> Result<usize> {
    let g = gamma(x.p(), x.n(), s)?;
    let w = g.ceil() as usize;
    if w > x.n() / 2 {
        return Err(invalid(format!(
            "noise window ceil(gamma(s)) = {w} exceeds floor(n/2) = {}",
            x.n() / 2
        )));
    }
    Ok(w)
}

fn min_sparse_eig(a: &SymMatrix, b: &SymMatrix, s: usize, budget: u64) -> Result<f64> {
    let u = sparse_abs_eigmax_with_budget(a, s, budget)?.value;
    let v = sparse_abs_eigmax_with_budget(b, s, budget)?.value;
    Ok(u.min(v))
}

/// `sigma_hat_s^2`: the smaller `s`-sparse eigenvalue of the covariances of the
/// first and last `ceil(gamma(s))` rows.
///
/// Fails when the two windows do not fit disjointly into the series.
pub fn noise_est_s(x: &Series, s: usize) -> Result<f64> {
    noise_est_s_with_budget(x, s, DEFAULT_BUDGET)
}

pub fn noise_est_s_with_budget(x: &Series, s: usize, budget: u64) -> Result<f64> {
    check_sparsity(x.p(), s)?;
    let w = noise_window_s(x, s)?;
    min_sparse_eig(&prefix_covariance(x, w)?, &suffix_covariance(x, w)?, s, budget)
}

fn noise_window_con(x: &Series) -> Result<usize> {
    let w = (1.0 + (x.p() as f64).ln()).ceil() as usize;
    if w > x.n() / 2 {
        return Err(invalid(format!(
            "noise window ceil(ln(e p)) = {w} exceeds floor(n/2) = {}; the relaxed test \
             implicitly restricts the sample size to satisfy n >= log(ep)",
            x.n() / 2
        )));
    }
    Ok(w)
}

/// `sigma_hat_con^2`: the smaller max-abs entry of the covariances of the first
/// and last `ceil(ln(e p))` rows.
pub fn noise_est_con(x: &Series) -> Result<f64> {
    let w = noise_window_con(x)?;
    Ok(prefix_covariance(x, w)?
        .max_abs_entry()
        .min(suffix_covariance(x, w)?.max_abs_entry()))
}

/// Oracle scan with known `s` and `sigma^2`.
pub fn scan_oracle(x: &Series, s: usize, sigma_sq: f64, opts: &ScanOptions) -> Result<MultiScan> {
    check_sparsity(x.p(), s)?;
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(invalid("sigma_sq must be positive and finite"));
    }
    let (n, p) = (x.n(), x.p());
    let grid = dyadic_grid(n)?;
    let table = EndMoments::new(x, &grid)?;
    let mut cells = Vec::with_capacity(grid.len());
    for &t in &grid {
        let d = table.difference(t)?;
        cells.push(ScanCell {
            t,
            s,
            statistic: sparse_abs_eigmax_with_budget(&d, s, opts.budget)?.value,
            noise_scale: sigma_sq,
            rate: rate_r(p, n, s, t)?,
            converged: true,
        });
    }
    Ok(MultiScan {
        variant: Variant::Oracle,
        cells,
        skipped: Vec::new(),
    })
}

/// Adaptive scan over `t` and `s` with estimated noise levels.
pub fn scan_adaptive(x: &Series, opts: &ScanOptions) -> Result<MultiScan> {
    let (n, p) = (x.n(), x.p());
    let grid = dyadic_grid(n)?;
    let sparsities = sparsity_grid(p)?;

    // Per-sparsity noise level or reason to skip.
    let mut windows = Vec::new();
    let mut plan = Vec::with_capacity(sparsities.len());
    for &s in &sparsities {
        let g = gamma(p, n, s)?;
        let w = g.ceil() as usize;
        let entry = if g > n as f64 {
            Err(SkipReason::GammaExceedsN)
        } else if w > n / 2 {
            Err(SkipReason::NoiseWindowTooLong)
        } else {
            windows.push(w);
            Ok(w)
        };
        plan.push((s, entry));
    }
    let mut lengths = grid.clone();
    lengths.extend(&windows);
    let table = EndMoments::new(x, &lengths)?;

    let mut noise = Vec::with_capacity(plan.len());
    for &(s, entry) in &plan {
        let level = match entry {
            Ok(w) => {
                let v = min_sparse_eig(table.prefix(w)?, table.suffix(w)?, s, opts.budget)?;
                if v > 0.0 {
                    Ok(v)
                } else {
                    Err(SkipReason::ZeroNoise)
                }
            }
            Err(r) => Err(r),
        };
        noise.push((s, level));
    }

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for &t in &grid {
        let d = table.difference(t)?;
        for &(s, level) in &noise {
            match level {
                Ok(sigma_hat) => cells.push(ScanCell {
                    t,
                    s,
                    statistic: sparse_abs_eigmax_with_budget(&d, s, opts.budget)?.value,
                    noise_scale: sigma_hat,
                    rate: rate_r(p, n, s, t)?,
                    converged: true,
                }),
                Err(reason) => skipped.push(SkippedCell { t, s, reason }),
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::Undecidable(format!(
            "every (t, s) cell was skipped for n = {n}, p = {p}"
        )));
    }
    Ok(MultiScan {
        variant: Variant::Adaptive,
        cells,
        skipped,
    })
}

/// Relaxed adaptive scan.
pub fn scan_adaptive_sdp(x: &Series, opts: &ScanOptions) -> Result<MultiScan> {
    let (n, p) = (x.n(), x.p());
    let grid = dyadic_grid(n)?;
    let sparsities = sparsity_grid(p)?;
    let w = noise_window_con(x).map_err(|e| Error::Undecidable(e.to_string()))?;
    let mut lengths = grid.clone();
    lengths.push(w);
    let table = EndMoments::new(x, &lengths)?;
    let sigma_con = table.prefix(w)?.max_abs_entry().min(table.suffix(w)?.max_abs_entry());
    if sigma_con == 0.0 {
        return Err(Error::DegenerateData(
            "noise estimate from the end windows is zero".into(),
        ));
    }
    let mut cells = Vec::with_capacity(grid.len() * sparsities.len());
    for &t in &grid {
        let d = table.difference(t)?;
        for &s in &sparsities {
            let sol = relaxed_sparse_eigmax_with(&d, s, opts.relax)?;
            cells.push(ScanCell {
                t,
                s,
                statistic: sol.lower,
                noise_scale: sigma_con,
                rate: rate_h(p, n, s, t)?,
                converged: sol.converged,
            });
        }
    }
    Ok(MultiScan {
        variant: Variant::AdaptiveSdp,
        cells,
        skipped: Vec::new(),
    })
}

/// Oracle test: rejects when `S_{t,s} > lambda sigma^2 r(p, n, s, t)` for some `t`.
pub fn test_multivariate(x: &Series, lambda: f64, s: usize, sigma_sq: f64) -> Result<MultiTestReport> {
    check_lambda(lambda)?;
    Ok(scan_oracle(x, s, sigma_sq, &ScanOptions::default())?.report(lambda))
}

/// Adaptive test with estimated noise and scanned sparsity.
pub fn test_adaptive(x: &Series, lambda: f64) -> Result<MultiTestReport> {
    check_lambda(lambda)?;
    Ok(scan_adaptive(x, &ScanOptions::default())?.report(lambda))
}

/// Relaxed adaptive test; `tol` is the solver gap tolerance.
pub fn test_adaptive_sdp(x: &Series, lambda: f64, tol: f64) -> Result<MultiTestReport> {
    check_lambda(lambda)?;
    let opts = ScanOptions {
        relax: RelaxOptions {
            tol,
            ..RelaxOptions::default()
        },
        ..ScanOptions::default()
    };
    Ok(scan_adaptive_sdp(x, &opts)?.report(lambda))
}
