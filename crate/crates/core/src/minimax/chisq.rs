//! Chi-square divergence between the null and the prior mixtures.
//!
//! For two draws with changepoints `Delta_1 <= Delta_2`, shrinkages
//! `kappa_1, kappa_2` and directions with inner product `c`, the expected
//! likelihood-ratio product under `N(0, sigma^2 I)` is
//!
//! ```text
//! {(1 + a1)(1 + a2) / (1 + a1 + a2 + a1 a2 (1 - c^2))}^{Delta_1 / 2},   a_i = kappa_i / (sigma^2 - kappa_i).
//! ```
//!
//! Averaging it over pairs of prior draws gives `chi^2 + 1`.

use rand::Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::grid::dyadic_grid;
use crate::minimax::prior::kappa;
use crate::rng::{domain, replicate};

fn alpha(kappa: f64, sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(invalid("sigma_sq must be positive and finite"));
    }
    if !(kappa >= 0.0) {
        return Err(invalid("kappa must be nonnegative"));
    }
    if kappa >= sigma_sq {
        return Err(Error::Domain(format!(
            "kappa = {kappa} must be below sigma_sq = {sigma_sq}"
        )));
    }
    Ok(kappa / (sigma_sq - kappa))
}

fn check_pair(delta1: usize, delta2: usize, inner: f64) -> Result<()> {
    if delta1 < 1 || delta1 > delta2 {
        return Err(invalid(format!("need 1 <= delta1 <= delta2, got {delta1}, {delta2}")));
    }
    if !(inner.abs() <= 1.0) {
        return Err(invalid("inner product must lie in [-1, 1]"));
    }
    Ok(())
}

fn log_cross(delta1: usize, a1: f64, a2: f64, c2: f64) -> f64 {
    // (1+a1)(1+a2) / (1+a1+a2+a1 a2 (1-c^2)) = 1 / (1 - a1 a2 c^2 / ((1+a1)(1+a2)))
    let x = a1 * a2 * c2 / ((1.0 + a1) * (1.0 + a2));
    -0.5 * delta1 as f64 * (-x).ln_1p()
}

/// The closed-form cross term. Callers order the pair so `delta1 <= delta2`.
pub fn chisq_cross_term(
    delta1: usize,
    delta2: usize,
    kappa1: f64,
    kappa2: f64,
    sigma_sq: f64,
    inner: f64,
) -> Result<f64> {
    check_pair(delta1, delta2, inner)?;
    let (a1, a2) = (alpha(kappa1, sigma_sq)?, alpha(kappa2, sigma_sq)?);
    let value = log_cross(delta1, a1, a2, inner * inner).exp();
    debug_assert!(value <= log_cross_bound(delta1, a1, a2, inner * inner).exp() * (1.0 + 1e-12));
    Ok(value)
}

fn log_cross_bound(delta1: usize, a1: f64, a2: f64, c2: f64) -> f64 {
    let d = delta1 as f64;
    0.5 * c2 * (d * a1 * a2).min(d * a1)
}

/// The exponential upper bound
/// `exp(c^2/2 min(sqrt(D1/D2) sqrt(D2 a2^2) sqrt(D1 a1^2), D1 a1))` on the cross term.
pub fn chisq_cross_bound(
    delta1: usize,
    delta2: usize,
    kappa1: f64,
    kappa2: f64,
    sigma_sq: f64,
    inner: f64,
) -> Result<f64> {
    check_pair(delta1, delta2, inner)?;
    let (a1, a2) = (alpha(kappa1, sigma_sq)?, alpha(kappa2, sigma_sq)?);
    Ok(log_cross_bound(delta1, a1, a2, inner * inner).exp())
}

/// `(delta, kappa)` for every grid level, ascending in `delta`.
fn levels(n: usize, sigma_sq: f64, rho: f64) -> Result<Vec<(usize, f64)>> {
    dyadic_grid(n)?
        .into_iter()
        .map(|d| Ok((d, kappa(d, rho, sigma_sq)?)))
        .collect()
}

/// Mean of `cross - 1` over all ordered level pairs at a fixed `c^2`.
fn mean_excess(levels: &[(usize, f64)], sigma_sq: f64, c2: f64) -> f64 {
    let l = levels.len();
    let mut total = 0.0;
    for (i, &(d1, k1)) in levels.iter().enumerate() {
        let a1 = k1 / (sigma_sq - k1);
        // Diagonal once, off-diagonal pairs twice.
        total += log_cross(d1, a1, a1, c2).exp_m1();
        for &(_, k2) in &levels[i + 1..] {
            let a2 = k2 / (sigma_sq - k2);
            total += 2.0 * log_cross(d1, a1, a2, c2).exp_m1();
        }
    }
    total / (l * l) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChisqUni {
    /// The exact divergence.
    pub exact: f64,
    /// The two-term bound `E exp(rho/2) 1{D_- <= rho} + E exp(2^{-|l1-l2|/2-1} rho) - 1`.
    pub two_term_bound: f64,
}

/// Chi-square divergence of the univariate prior mixture from the null.
pub fn chisq_bound_uni(n: usize, sigma_sq: f64, rho: f64) -> Result<ChisqUni> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid("rho must be positive and finite"));
    }
    let lv = levels(n, sigma_sq, rho)?;
    let exact = mean_excess(&lv, sigma_sq, 1.0);

    let l = lv.len();
    let (mut first, mut second) = (0.0, 0.0);
    for i in 0..l {
        for j in 0..l {
            let d_minus = lv[i].0.min(lv[j].0) as f64;
            if d_minus <= rho {
                first += (0.5 * rho).exp();
            }
            let gap = i.abs_diff(j) as f64;
            second += (2f64.powf(-gap / 2.0 - 1.0) * rho).exp();
        }
    }
    let pairs = (l * l) as f64;
    Ok(ChisqUni {
        exact,
        two_term_bound: first / pairs + second / pairs - 1.0,
    })
}

fn check_multi(p: usize, s: usize) -> Result<()> {
    if s < 1 || s > p {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, p = {p}]")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub reps: usize,
}

/// Monte Carlo estimate of the multivariate prior's divergence.
///
/// The changepoint pairs are summed exactly; only `<u1, u2> = G / s` is
/// sampled, with `H ~ Hypergeometric(p, s, s)` shared coordinates and `G` a
/// sum of `H` random signs.
pub fn chisq_bound_multi(
    p: usize,
    n: usize,
    s: usize,
    sigma_sq: f64,
    rho: f64,
    mc_reps: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_multi(p, s)?;
    if mc_reps < 1 {
        return Err(invalid("mc_reps must be at least 1"));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid("rho must be positive and finite"));
    }
    let lv = levels(n, sigma_sq, rho)?;
    let hyper =
        Hypergeometric::new(p as u64, s as u64, s as u64).map_err(|e| invalid(format!("hypergeometric law: {e}")))?;
    let values: Vec<f64> = (0..mc_reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate(seed, domain::OVERLAP, r as u64);
            let h = hyper.sample(&mut rng);
            let g: i64 = (0..h).map(|_| if rng.random::<bool>() { 1 } else { -1 }).sum();
            let c = g as f64 / s as f64;
            mean_excess(&lv, sigma_sq, c * c)
        })
        .collect();
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        se: (var / m).sqrt(),
        reps: mc_reps,
    })
}

fn ln_choose(n: u64, k: u64) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// The exact law of `(s <u1, u2>)^2` as `(value, probability)` pairs.
pub fn overlap_law(p: usize, s: usize) -> Result<Vec<(f64, f64)>> {
    check_multi(p, s)?;
    let (pp, ss) = (p as u64, s as u64);
    let total = ln_choose(pp, ss);
    let mut out: Vec<(f64, f64)> = Vec::new();
    let lo = (2 * ss).saturating_sub(pp);
    for h in lo..=ss {
        let ph = (ln_choose(ss, h) + ln_choose(pp - ss, ss - h) - total).exp();
        for b in 0..=h {
            let g = 2 * b as i64 - h as i64;
            let pb = (ln_choose(h, b) - h as f64 * std::f64::consts::LN_2).exp();
            let v = (g * g) as f64;
            match out.iter_mut().find(|(x, _)| *x == v) {
                Some(e) => e.1 += ph * pb,
                None => out.push((v, ph * pb)),
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// The multivariate divergence from the exact overlap law.
pub fn chisq_exact_multi(p: usize, n: usize, s: usize, sigma_sq: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid("rho must be positive and finite"));
    }
    let lv = levels(n, sigma_sq, rho)?;
    let s2 = (s * s) as f64;
    Ok(overlap_law(p, s)?
        .into_iter()
        .map(|(g2, w)| w * mean_excess(&lv, sigma_sq, g2 / s2))
        .sum())
}

/// `max(exp(-alpha)/2, 1 - sqrt(alpha/2))`: a floor on the sum of the two
/// error probabilities of any test when the divergence is at most `alpha`.
pub fn minimax_lower_bound(alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(invalid("alpha must be nonnegative"));
    }
    Ok((0.5 * (-alpha).exp()).max(1.0 - (alpha / 2.0).sqrt()))
}
