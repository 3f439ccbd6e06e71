//! Scan grids and detection rates.
//!
//! All logarithms in the rates are natural; the grids use base-2 exponents.

use crate::error::{invalid, Result};

fn powers_of_two_up_to(max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut v = 1usize;
    while v <= max {
        out.push(v);
        match v.checked_mul(2) {
            Some(next) => v = next,
            None => break,
        }
    }
    out
}

/// Candidate split lengths `{1, 2, 4, ..., 2^floor(log2(n/2))}`.
///
/// Every element is at most `n / 2`, and for any `t0 <= n / 2` some grid
/// element `t` has `t0 / 2 <= t <= t0`.
pub fn dyadic_grid(n: usize) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(invalid(format!("dyadic grid needs n >= 2, got {n}")));
    }
    // 2^k <= n/2 iff 2^k <= floor(n/2) for integer powers.
    Ok(powers_of_two_up_to(n / 2))
}

/// Candidate sparsities `{1, 2, 4, ..., 2^floor(log2 p)}`.
pub fn sparsity_grid(p: usize) -> Result<Vec<usize>> {
    if p < 1 {
        return Err(invalid("sparsity grid needs p >= 1"));
    }
    Ok(powers_of_two_up_to(p))
}

/// `ln(ln(8n))`, the univariate detection boundary.
pub fn loglog8n(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(invalid(format!("loglog8n needs n >= 2, got {n}")));
    }
    Ok((8.0 * n as f64).ln().ln())
}

fn check_sparsity(p: usize, s: usize) -> Result<()> {
    if s < 1 || s > p {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, p = {p}]")));
    }
    Ok(())
}

/// `gamma(s) = s ln(e p / s)  v  ln ln(8n)`.
pub fn gamma(p: usize, n: usize, s: usize) -> Result<f64> {
    check_sparsity(p, s)?;
    let ll = loglog8n(n)?;
    let sf = s as f64;
    Ok((sf * (1.0 + (p as f64 / sf).ln())).max(ll))
}

fn sqrt_or_linear(g: f64, t: usize) -> f64 {
    let q = g / t as f64;
    q.sqrt().max(q)
}

/// Rate `r(p, n, s, t) = sqrt(gamma/t) v gamma/t` of the exact sparse test.
pub fn rate_r(p: usize, n: usize, s: usize, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(invalid("rate needs t >= 1"));
    }
    Ok(sqrt_or_linear(gamma(p, n, s)?, t))
}

/// Rate `h(p, n, s, t) = s (sqrt(L/t) v L/t)` of the relaxed test, with
/// `L = ln(e p) v ln ln(8n)`.
pub fn rate_h(p: usize, n: usize, s: usize, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(invalid("rate needs t >= 1"));
    }
    check_sparsity(p, s)?;
    let l = (1.0 + (p as f64).ln()).max(loglog8n(n)?);
    Ok(s as f64 * sqrt_or_linear(l, t))
}

/// Univariate threshold shape `sqrt(ll/t) v ll/t` with `ll = ln ln(8n)`.
pub fn rate_uni(n: usize, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(invalid("rate needs t >= 1"));
    }
    Ok(sqrt_or_linear(loglog8n(n)?, t))
}
