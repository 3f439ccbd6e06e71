//! Signal-strength parameterizations of the alternative.

use crate::error::{invalid, Error, Result};
use crate::grid::gamma;
use crate::matrix::SymMatrix;

fn effective_size(t0: usize, n: usize) -> Result<usize> {
    if t0 < 1 || t0 + 1 > n {
        return Err(invalid(format!(
            "changepoint t0 = {t0} must lie in [1, n-1 = {}]",
            n.saturating_sub(1)
        )));
    }
    Ok(t0.min(n - t0))
}

fn ratio_term(r: f64) -> f64 {
    r.min(r * r)
}

/// A univariate variance change and its strength
/// `rho = min(t0, n-t0) (ratio ^ ratio^2)`, `ratio = |s1 - s2| / (s1 ^ s2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalStrengthUni {
    pub t0: usize,
    pub n: usize,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho: f64,
}

impl SignalStrengthUni {
    pub fn new(t0: usize, n: usize, sigma1_sq: f64, sigma2_sq: f64) -> Result<Self> {
        let rho = signal_strength_uni(t0, n, sigma1_sq, sigma2_sq)?;
        Ok(Self {
            t0,
            n,
            sigma1_sq,
            sigma2_sq,
            rho,
        })
    }
}

pub fn signal_strength_uni(t0: usize, n: usize, sigma1_sq: f64, sigma2_sq: f64) -> Result<f64> {
    let delta = effective_size(t0, n)?;
    if !(sigma1_sq > 0.0 && sigma2_sq > 0.0) || !sigma1_sq.is_finite() || !sigma2_sq.is_finite() {
        return Err(invalid("variances must be positive and finite"));
    }
    let ratio = (sigma1_sq - sigma2_sq).abs() / sigma1_sq.min(sigma2_sq);
    Ok(delta as f64 * ratio_term(ratio))
}

/// A covariance change and its strength
/// `rho = min(t0, n-t0) (r ^ r^2)`, `r = ||S1 - S2||_op / (sigma^2 - ||S1 - S2||_op)`,
/// with nominal noise level `sigma^2 = ||S1||_op v ||S2||_op`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalStrengthMulti {
    pub t0: usize,
    pub n: usize,
    pub sigma1: SymMatrix,
    pub sigma2: SymMatrix,
    pub sigma_sq: f64,
    pub s: usize,
    pub rho: f64,
}

impl SignalStrengthMulti {
    pub fn new(t0: usize, n: usize, sigma1: SymMatrix, sigma2: SymMatrix, s: usize) -> Result<Self> {
        if s < 1 || s > sigma1.dim() {
            return Err(invalid(format!(
                "sparsity s = {s} must lie in [1, p = {}]",
                sigma1.dim()
            )));
        }
        let rho = signal_strength_multi(t0, n, &sigma1, &sigma2)?;
        let sigma_sq = sigma1.operator_norm().max(sigma2.operator_norm());
        Ok(Self {
            t0,
            n,
            sigma1,
            sigma2,
            sigma_sq,
            s,
            rho,
        })
    }
}

pub fn signal_strength_multi(t0: usize, n: usize, sigma1: &SymMatrix, sigma2: &SymMatrix) -> Result<f64> {
    let delta = effective_size(t0, n)?;
    sigma1.check_dim(sigma2)?;
    if sigma1.lambda_min() <= 0.0 || sigma2.lambda_min() <= 0.0 {
        return Err(invalid("covariances must be positive definite"));
    }
    let sigma_sq = sigma1.operator_norm().max(sigma2.operator_norm());
    let change = sigma1.sub(sigma2)?.operator_norm();
    if change >= sigma_sq {
        return Err(Error::Domain(format!(
            "change norm {change} is not below the noise level {sigma_sq}; signal strength undefined"
        )));
    }
    let r = change / (sigma_sq - change);
    Ok(delta as f64 * ratio_term(r))
}

/// Lower bound `1 + (c gamma / Delta  v  sqrt(c gamma / Delta))` on the
/// largest sparse variance ratio implied by a signal strength of at least
/// `c gamma(p, n, s)`.
pub fn detectability_ratio_floor(p: usize, n: usize, s: usize, t0: usize, c: f64) -> Result<f64> {
    let delta = effective_size(t0, n)?;
    if !(c > 0.0) || !c.is_finite() {
        return Err(invalid("c must be positive"));
    }
    let q = c * gamma(p, n, s)? / delta as f64;
    Ok(1.0 + q.max(q.sqrt()))
}
