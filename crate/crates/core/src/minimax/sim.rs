//! Monte Carlo error rates, threshold calibration and boundary search.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::loglog8n;
use crate::minimax::prior::{sample_alt_with, sample_data_with, sample_null_with, PriorSpec};
use crate::procedure::Scanner;
use crate::rng::{domain, replicate};
use crate::series::Series;

/// Anything that can decide between null and alternative on a data panel.
pub trait Detector: Sync {
    fn rejects(&self, x: &Series) -> Result<bool>;
}

impl<F> Detector for F
where
    F: Fn(&Series) -> Result<bool> + Sync,
{
    fn rejects(&self, x: &Series) -> Result<bool> {
        self(x)
    }
}

/// A scanner with a fixed threshold multiplier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholded {
    pub scanner: Scanner,
    pub lambda: f64,
}

impl Detector for Thresholded {
    fn rejects(&self, x: &Series) -> Result<bool> {
        self.scanner.rejects(x, self.lambda)
    }
}

/// Rejections among replicates, with failures kept separate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tally {
    pub rejected: usize,
    pub accepted: usize,
    pub failed: usize,
    /// Message of the first failing replicate.
    pub first_error: Option<String>,
}

impl Tally {
    fn from_results(results: Vec<Result<bool>>) -> Self {
        let mut t = Tally::default();
        for r in results {
            match r {
                Ok(true) => t.rejected += 1,
                Ok(false) => t.accepted += 1,
                Err(e) => {
                    t.failed += 1;
                    t.first_error.get_or_insert_with(|| e.to_string());
                }
            }
        }
        t
    }

    pub fn evaluated(&self) -> usize {
        self.rejected + self.accepted
    }

    pub fn rejection_rate(&self) -> f64 {
        self.rejected as f64 / self.evaluated() as f64
    }
}

fn check_reps(reps: usize) -> Result<()> {
    if reps < 1 {
        return Err(invalid("reps must be at least 1"));
    }
    Ok(())
}

/// Runs `detector` on `reps` datasets of i.i.d. `N(0, sigma^2 I_p)` rows.
pub fn null_tally<D: Detector + ?Sized>(
    detector: &D,
    n: usize,
    p: usize,
    sigma_sq: f64,
    reps: usize,
    seed: u64,
) -> Result<Tally> {
    check_reps(reps)?;
    let results = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate(seed, domain::NULL, r as u64);
            detector.rejects(&sample_null_with(n, p, sigma_sq, &mut rng)?)
        })
        .collect();
    Ok(Tally::from_results(results))
}

/// Runs `detector` on `reps` datasets drawn from the prior.
pub fn alt_tally<D: Detector + ?Sized>(detector: &D, spec: &PriorSpec, reps: usize, seed: u64) -> Result<Tally> {
    check_reps(reps)?;
    let spec = spec.validated()?;
    let results = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate(seed, domain::ALTERNATIVE, r as u64);
            let draw = sample_alt_with(&spec, &mut rng)?;
            detector.rejects(&sample_data_with(&draw, spec.n, spec.p, &mut rng)?)
        })
        .collect();
    Ok(Tally::from_results(results))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutcome {
    /// Rejection rate on null data.
    pub type1: f64,
    /// Acceptance rate on prior draws.
    pub type2: f64,
    pub se1: f64,
    pub se2: f64,
    pub reps: usize,
    pub seed: u64,
    /// Replicates whose test returned an error; excluded from the rates.
    pub failed_null: usize,
    pub failed_alt: usize,
    pub first_error: Option<String>,
}

fn se(rate: f64, m: usize) -> f64 {
    (rate * (1.0 - rate) / m as f64).sqrt()
}

/// Type I error on `N(0, sigma^2 I)` data and Type II error on prior draws.
///
/// Replicate `r` uses its own random stream, so the outcome depends only on
/// `(spec, reps, seed)`.
pub fn monte_carlo_errors<D: Detector + ?Sized>(
    detector: &D,
    spec: &PriorSpec,
    reps: usize,
    seed: u64,
) -> Result<SimOutcome> {
    let spec = spec.validated()?;
    let null = null_tally(detector, spec.n, spec.p, spec.sigma_sq, reps, seed)?;
    let alt = alt_tally(detector, &spec, reps, seed)?;
    if null.evaluated() == 0 || alt.evaluated() == 0 {
        return Err(Error::Undecidable(format!(
            "every replicate failed: {}",
            null.first_error
                .as_ref()
                .or(alt.first_error.as_ref())
                .cloned()
                .unwrap_or_default()
        )));
    }
    let type1 = null.rejection_rate();
    let type2 = 1.0 - alt.rejection_rate();
    Ok(SimOutcome {
        type1,
        type2,
        se1: se(type1, null.evaluated()),
        se2: se(type2, alt.evaluated()),
        reps,
        seed,
        failed_null: null.failed,
        failed_alt: alt.failed,
        first_error: null.first_error.or(alt.first_error),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub lambda: f64,
    pub delta: f64,
    pub reps: usize,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    /// Rank of `lambda` among the sorted null statistics (1-based).
    pub rank: usize,
}

/// Empirical `(1 - delta)`-quantile of the maximal standardized statistic on
/// `N(0, I_p)` data, so the test rejects null data at rate about `delta`.
pub fn calibrate_lambda(
    scanner: &Scanner,
    n: usize,
    p: usize,
    delta: f64,
    reps: usize,
    seed: u64,
) -> Result<Calibration> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid("delta must lie in (0, 1]"));
    }
    if reps < 100 {
        return Err(invalid(format!(
            "calibration needs at least 100 replicates, got {reps}"
        )));
    }
    if (reps as f64) * delta < 5.0 {
        return Err(invalid(format!(
            "quantile infeasible: reps * delta = {} < 5 null exceedances",
            reps as f64 * delta
        )));
    }
    let mut stats = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate(seed, domain::CALIBRATION, r as u64);
            scanner.max_standardized(&sample_null_with(n, p, 1.0, &mut rng)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_by(f64::total_cmp);
    let rank = (((1.0 - delta) * reps as f64).ceil() as usize).clamp(1, reps);
    Ok(Calibration {
        lambda: stats[rank - 1],
        delta,
        reps,
        seed,
        n,
        p,
        rank,
    })
}

/// Settings for the 50%-power search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryOptions {
    pub target_power: f64,
    pub reps: usize,
    pub seed: u64,
    /// Bisection steps on `log(rho)` after bracketing.
    pub steps: usize,
    pub rho_start: f64,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        Self {
            target_power: 0.5,
            reps: 1000,
            seed: 0,
            steps: 14,
            rho_start: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub n: usize,
    pub loglog8n: f64,
    pub lambda: f64,
    /// Estimated signal strength at which power equals the target.
    pub rho_star: f64,
    pub ratio: f64,
    /// Power at the bracket ends.
    pub power_low: f64,
    pub power_high: f64,
}

/// Bisects `rho` for the univariate prior until `detector`'s power crosses
/// the target. All evaluations reuse the same replicate streams.
pub fn power_boundary<D: Detector + ?Sized>(
    detector: &D,
    n: usize,
    sigma_sq: f64,
    opts: &BoundaryOptions,
) -> Result<(f64, f64, f64)> {
    if !(opts.target_power > 0.0 && opts.target_power < 1.0) {
        return Err(invalid("target power must lie in (0, 1)"));
    }
    if !(opts.rho_start > 0.0) {
        return Err(invalid("rho_start must be positive"));
    }
    let power = |rho: f64| -> Result<f64> {
        let spec = PriorSpec::uni(n, sigma_sq, rho)?;
        let t = alt_tally(detector, &spec, opts.reps, opts.seed)?;
        if t.evaluated() == 0 {
            return Err(Error::Undecidable(t.first_error.unwrap_or_default()));
        }
        Ok(t.rejection_rate())
    };
    let target = opts.target_power;
    let (mut lo, mut hi) = (opts.rho_start, opts.rho_start);
    let mut p_lo = power(lo)?;
    let mut p_hi = p_lo;
    const MAX_DOUBLINGS: usize = 60;
    for _ in 0..MAX_DOUBLINGS {
        if p_hi >= target {
            break;
        }
        lo = hi;
        p_lo = p_hi;
        hi *= 2.0;
        p_hi = power(hi)?;
    }
    if p_hi < target {
        return Err(Error::Undecidable(format!(
            "power stays below {target} up to rho = {hi}"
        )));
    }
    for _ in 0..MAX_DOUBLINGS {
        if p_lo < target {
            break;
        }
        hi = lo;
        p_hi = p_lo;
        lo /= 2.0;
        p_lo = power(lo)?;
    }
    if p_lo >= target {
        return Err(Error::Undecidable(format!("power exceeds {target} down to rho = {lo}")));
    }
    for _ in 0..opts.steps {
        let mid = (lo * hi).sqrt();
        let pm = power(mid)?;
        if pm >= target {
            hi = mid;
            p_hi = pm;
        } else {
            lo = mid;
            p_lo = pm;
        }
    }
    Ok(((lo * hi).sqrt(), p_lo, p_hi))
}

/// Calibrates a univariate scanner at each `n` and records the 50%-power
/// signal strength relative to `ln ln(8n)`.
pub fn boundary_sweep(
    scanner: &Scanner,
    ns: &[usize],
    delta: f64,
    calibration_reps: usize,
    opts: &BoundaryOptions,
) -> Result<Vec<BoundaryPoint>> {
    ns.iter()
        .map(|&n| {
            let cal = calibrate_lambda(scanner, n, 1, delta, calibration_reps, opts.seed)?;
            let det = Thresholded {
                scanner: *scanner,
                lambda: cal.lambda,
            };
            let (rho_star, power_low, power_high) = power_boundary(&det, n, 1.0, opts)?;
            let ll = loglog8n(n)?;
            Ok(BoundaryPoint {
                n,
                loglog8n: ll,
                lambda: cal.lambda,
                rho_star,
                ratio: rho_star / ll,
                power_low,
                power_high,
            })
        })
        .collect()
}
