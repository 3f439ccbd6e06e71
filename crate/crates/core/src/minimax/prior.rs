//! Least-favourable priors over the alternative.
//!
//! A draw picks `Delta = 2^l` with `l` uniform on `{0, ..., floor(log2(n/2))}`
//! and shrinks the first `Delta` rows: `Sigma_1 = sigma^2 - kappa` (univariate)
//! or `Sigma_1 = sigma^2 I - kappa u u^T` with `u` a random `s`-sparse sign
//! vector (multivariate). Rows after `Delta` have covariance `sigma^2 I`.
//! The shrinkage `kappa(Delta)` is chosen so every draw has signal strength
//! exactly `rho`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::dyadic_grid;
use crate::matrix::SymMatrix;
use crate::rng::seeded;
use crate::series::Series;

/// Above this dimension multivariate draws use the closed-form square root
/// of `sigma^2 I - kappa u u^T` instead of a Cholesky factor.
pub const CHOLESKY_MAX_DIM: usize = 64;

/// Shrinkage giving signal strength `rho` at effective sample size `delta`:
/// `sigma^2 rho / (delta + rho)` when `delta <= rho`, otherwise
/// `sigma^2 sqrt(rho) / (sqrt(delta) + sqrt(rho))`.
pub fn kappa(delta: usize, rho: f64, sigma_sq: f64) -> Result<f64> {
    if delta < 1 {
        return Err(invalid("delta must be at least 1"));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(invalid("rho must be positive and finite"));
    }
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(invalid("sigma_sq must be positive and finite"));
    }
    let d = delta as f64;
    Ok(if d <= rho {
        sigma_sq * rho / (d + rho)
    } else {
        sigma_sq * rho.sqrt() / (d.sqrt() + rho.sqrt())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Uni,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub sigma_sq: f64,
    pub rho: f64,
    /// Fixed changepoint instead of the dyadic mixture. `kappa` then uses
    /// `min(t0, n - t0)`.
    pub changepoint: Option<usize>,
}

impl PriorSpec {
    pub fn uni(n: usize, sigma_sq: f64, rho: f64) -> Result<Self> {
        Self {
            kind: PriorKind::Uni,
            n,
            p: 1,
            s: 1,
            sigma_sq,
            rho,
            changepoint: None,
        }
        .validated()
    }

    pub fn multi(n: usize, p: usize, s: usize, sigma_sq: f64, rho: f64) -> Result<Self> {
        Self {
            kind: PriorKind::Multi,
            n,
            p,
            s,
            sigma_sq,
            rho,
            changepoint: None,
        }
        .validated()
    }

    pub fn with_changepoint(mut self, t0: usize) -> Result<Self> {
        self.changepoint = Some(t0);
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n < 2 {
            return Err(invalid("n must be at least 2"));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(invalid("rho must be positive and finite"));
        }
        if !(self.sigma_sq > 0.0) || !self.sigma_sq.is_finite() {
            return Err(invalid("sigma_sq must be positive and finite"));
        }
        match self.kind {
            PriorKind::Uni if self.p != 1 || self.s != 1 => {
                return Err(invalid("univariate prior needs p = s = 1"));
            }
            PriorKind::Multi if self.s < 1 || self.s > self.p => {
                return Err(invalid(format!(
                    "sparsity s = {} must lie in [1, p = {}]",
                    self.s, self.p
                )));
            }
            _ => {}
        }
        if let Some(t0) = self.changepoint {
            if t0 < 1 || t0 >= self.n {
                return Err(invalid(format!("changepoint t0 = {t0} must lie in [1, n-1]")));
            }
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AltDraw {
    /// Rows `1..=delta` are pre-change.
    pub delta: usize,
    pub kappa: f64,
    /// `s`-sparse unit direction with entries `+-s^{-1/2}`; `[1.0]` for the
    /// univariate prior.
    pub u: Vec<f64>,
    /// Indices of the nonzero entries of `u`, ascending.
    pub support: Vec<usize>,
    pub sigma1: SymMatrix,
    pub sigma2: SymMatrix,
}

impl AltDraw {
    /// `min(delta, n - delta) (r ^ r^2)` with `r = kappa / (sigma^2 - kappa)`.
    pub fn signal_strength(&self, n: usize, sigma_sq: f64) -> f64 {
        let r = self.kappa / (sigma_sq - self.kappa);
        self.delta.min(n - self.delta) as f64 * r.min(r * r)
    }
}

pub fn sample_alt(spec: &PriorSpec, seed: u64) -> Result<AltDraw> {
    sample_alt_with(spec, &mut seeded(seed))
}

pub fn sample_alt_with<R: Rng + ?Sized>(spec: &PriorSpec, rng: &mut R) -> Result<AltDraw> {
    let spec = spec.validated()?;
    let (delta, effective) = match spec.changepoint {
        Some(t0) => (t0, t0.min(spec.n - t0)),
        None => {
            let grid = dyadic_grid(spec.n)?;
            let d = grid[rng.random_range(0..grid.len())];
            (d, d)
        }
    };
    let k = kappa(effective, spec.rho, spec.sigma_sq)?;
    let p = spec.p;
    let (u, support) = match spec.kind {
        PriorKind::Uni => (vec![1.0], vec![0]),
        PriorKind::Multi => {
            let mut support = sample(rng, p, spec.s).into_vec();
            support.sort_unstable();
            let a = (spec.s as f64).sqrt().recip();
            let mut u = vec![0.0; p];
            for &i in &support {
                u[i] = if rng.random::<bool>() { a } else { -a };
            }
            (u, support)
        }
    };
    let uu = SymMatrix::outer(&u);
    let sigma2 = SymMatrix::identity(p).scale(spec.sigma_sq);
    let sigma1 = sigma2.sub(&uu.scale(k))?;
    Ok(AltDraw {
        delta,
        kappa: k,
        u,
        support,
        sigma1,
        sigma2,
    })
}

fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Pure noise: `n` rows of `N(0, sigma^2 I_p)`.
pub fn sample_null_with<R: Rng + ?Sized>(n: usize, p: usize, sigma_sq: f64, rng: &mut R) -> Result<Series> {
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(invalid("sigma_sq must be positive and finite"));
    }
    let mut values = vec![0.0; n * p];
    fill_normal(rng, &mut values);
    let sd = sigma_sq.sqrt();
    values.iter_mut().for_each(|v| *v *= sd);
    Series::new(values, n, p)
}

pub fn sample_data(draw: &AltDraw, n: usize, p: usize, seed: u64) -> Result<Series> {
    sample_data_with(draw, n, p, &mut seeded(seed))
}

/// Rows `1..=delta` from `N(0, Sigma_1)`, the rest from `N(0, Sigma_2)`.
pub fn sample_data_with<R: Rng + ?Sized>(draw: &AltDraw, n: usize, p: usize, rng: &mut R) -> Result<Series> {
    if draw.sigma1.dim() != p || draw.u.len() != p {
        return Err(invalid(format!(
            "draw has dimension {}, expected p = {p}",
            draw.sigma1.dim()
        )));
    }
    if draw.delta < 1 || draw.delta >= n {
        return Err(invalid(format!(
            "changepoint {} must lie in [1, n-1 = {}]",
            draw.delta,
            n - 1
        )));
    }
    let sigma_sq = draw.sigma2.get(0, 0);
    let sd = sigma_sq.sqrt();
    let mut values = vec![0.0; n * p];
    fill_normal(rng, &mut values);
    let (pre, post) = values.split_at_mut(draw.delta * p);
    post.iter_mut().for_each(|v| *v *= sd);

    if p <= CHOLESKY_MAX_DIM {
        let chol = nalgebra::Cholesky::new(draw.sigma1.as_matrix().clone())
            .ok_or_else(|| invalid("pre-change covariance is not positive definite"))?;
        let l: DMatrix<f64> = chol.l();
        for row in pre.chunks_mut(p) {
            let z = DVector::from_column_slice(row);
            let x = &l * z;
            row.copy_from_slice(x.as_slice());
        }
    } else {
        // (sd I - c u u^T)^2 = sigma^2 I - kappa u u^T with c = sd - sqrt(sigma^2 - kappa).
        let c = sd - (sigma_sq - draw.kappa).sqrt();
        for row in pre.chunks_mut(p) {
            let proj: f64 = draw.support.iter().map(|&i| draw.u[i] * row[i]).sum();
            row.iter_mut().for_each(|v| *v *= sd);
            for &i in &draw.support {
                row[i] -= c * proj * draw.u[i];
            }
        }
    }
    Series::new(values, n, p)
}
