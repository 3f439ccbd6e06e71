//! Semidefinite relaxation of the sparse eigenvalue.
//!
//! The relaxed value is
//!
//! ```text
//! lambda_hat^s(A) = sup { |trace(A Z)| : Z PSD, trace(Z) = 1, ||Z||_1 <= s }
//! ```
//!
//! computed as the larger of the two linear programs for `+A` and `-A`.
//! Each side is solved by ADMM splitting over the spectraplex
//! `{Z PSD, trace(Z) = 1}` and the entrywise l1 ball `{||Z||_1 <= s}`.
//! Nothing about the answer relies on the solver having converged: the
//! returned `lower` is the objective at an exactly feasible `Z`, and `upper`
//! is the weak-duality bound `lambda_max(A + Y) + s ||Y||_inf` at an explicit
//! symmetric `Y`, so `[lower, upper]` always contains the optimum.
//!
//! The relaxed value is sandwiched as `lambda_max^s(A) <= lambda_hat^s(A) <= s ||A||_inf`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::matrix::SymMatrix;

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 5000;

const CHECK_EVERY: usize = 10;
const LINE_SEARCH_EVALS: usize = 16;
const RESIDUAL_RATIO: f64 = 10.0;
const RHO_FACTOR: f64 = 2.0;

/// Which one-sided program a bound belongs to: `+A` or `-A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxOptions {
    /// Requested gap, relative to `s ||A||_inf`.
    pub tol: f64,
    /// ADMM iteration cap per side.
    pub max_iter: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Certified value interval of the relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxSolution {
    /// `|trace(A z)|`.
    pub lower: f64,
    /// `max` of the two one-sided dual bounds.
    pub upper: f64,
    /// Feasible primal point attaining `lower`.
    pub z: SymMatrix,
    /// Dual certificate of the side attaining `upper`.
    pub y: SymMatrix,
    /// Dual certificate of the other side (its bound is `<= upper`).
    pub y_opposite: SymMatrix,
    pub lower_side: Side,
    pub upper_side: Side,
    pub iterations: usize,
    pub tol: f64,
    /// `upper - lower <= tol * max(1, s ||A||_inf)`.
    pub converged: bool,
}

impl RelaxSolution {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// `lambda_max(A + Y) + s ||Y||_inf`, an upper bound on
/// `sup { trace(A Z) : Z PSD, trace(Z) = 1, ||Z||_1 <= s }` for every symmetric `Y`.
pub fn dual_upper_bound(a: &SymMatrix, s: usize, y: &SymMatrix) -> Result<f64> {
    a.check_dim(y)?;
    Ok(a.add(y)?.lambda_max() + s as f64 * y.max_abs_entry())
}

/// Relaxed sparse eigenvalue with default tolerance and iteration cap.
pub fn relaxed_sparse_eigmax(a: &SymMatrix, s: usize) -> Result<RelaxSolution> {
    relaxed_sparse_eigmax_with(a, s, RelaxOptions::default())
}

pub fn relaxed_sparse_eigmax_with(a: &SymMatrix, s: usize, opts: RelaxOptions) -> Result<RelaxSolution> {
    let p = a.dim();
    if s < 1 || s > p {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, p = {p}]")));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let scale = a.max_abs_entry();
    if scale == 0.0 {
        let z = SymMatrix::identity(p).scale(1.0 / p as f64);
        return Ok(RelaxSolution {
            lower: 0.0,
            upper: 0.0,
            z,
            y: SymMatrix::zeros(p),
            y_opposite: SymMatrix::zeros(p),
            lower_side: Side::Plus,
            upper_side: Side::Plus,
            iterations: 0,
            tol: opts.tol,
            converged: true,
        });
    }

    // Work on ||B||_inf = 1 so the iteration path is scale-free.
    let b = a.as_matrix() / scale;
    let abs_tol = opts.tol * s as f64;
    let mut sides = [SideSolver::new(b.clone(), s), SideSolver::new(-b, s)];
    let mut iterations = 0usize;
    loop {
        let best_lower = sides[0].lower.max(sides[1].lower);
        let active: Vec<usize> = (0..2)
            .filter(|&k| sides[k].upper - best_lower > abs_tol && sides[k].iterations < opts.max_iter)
            .collect();
        if active.is_empty() {
            break;
        }
        for &k in &active {
            sides[k].run(CHECK_EVERY.min(opts.max_iter - sides[k].iterations));
            iterations = iterations.max(sides[k].iterations);
        }
    }

    // Certificates are recomputed on the original matrix.
    let [plus, minus] = sides;
    let y_plus = SymMatrix::symmetrized(plus.best_y * scale);
    let y_minus = SymMatrix::symmetrized(minus.best_y * scale);
    let neg_a = a.scale(-1.0);
    let ub_plus = dual_upper_bound(a, s, &y_plus)?;
    let ub_minus = dual_upper_bound(&neg_a, s, &y_minus)?;
    let z_plus = SymMatrix::symmetrized(plus.best_z);
    let z_minus = SymMatrix::symmetrized(minus.best_z);
    let lb_plus = a.trace_product(&z_plus);
    let lb_minus = -a.trace_product(&z_minus);

    let (lower, z, lower_side) = if lb_plus >= lb_minus {
        (lb_plus.abs(), z_plus, Side::Plus)
    } else {
        (lb_minus.abs(), z_minus, Side::Minus)
    };
    let (upper, y, y_opposite, upper_side) = if ub_plus >= ub_minus {
        (ub_plus, y_plus, y_minus, Side::Plus)
    } else {
        (ub_minus, y_minus, y_plus, Side::Minus)
    };
    // Equal bounds can come out one rounding step apart.
    let upper = upper.max(lower);
    let converged = upper - lower <= opts.tol * (s as f64 * scale).max(1.0);
    Ok(RelaxSolution {
        lower,
        upper,
        z,
        y,
        y_opposite,
        lower_side,
        upper_side,
        iterations,
        tol: opts.tol,
        converged,
    })
}

/// ADMM for `max trace(C Z)` over the spectraplex intersected with the l1 ball.
///
/// Splitting `Z = W` with `Z` on the spectraplex and `W` in the ball gives the
/// scaled iteration
///
/// ```text
/// Z <- P_spec(W - U + C / rho)
/// W <- P_l1(Z + U)
/// U <- U + Z - W
/// ```
///
/// and `Y = -rho U` is a dual certificate: at a fixed point `Z` maximizes
/// `trace((C + Y) Z)` over the spectraplex and `W` attains `s ||U||_inf`.
struct SideSolver {
    c: DMatrix<f64>,
    s: usize,
    z: DMatrix<f64>,
    w: DMatrix<f64>,
    u: DMatrix<f64>,
    rho: f64,
    // Top eigenvector of the latest Z, for the rank-one rounding candidate.
    top: Option<DVector<f64>>,
    lower: f64,
    upper: f64,
    best_z: DMatrix<f64>,
    best_y: DMatrix<f64>,
    iterations: usize,
}

impl SideSolver {
    fn new(c: DMatrix<f64>, s: usize) -> Self {
        let p = c.nrows();

        // Best coordinate direction is always feasible.
        let (i_max, d_max) =
            (0..p).map(|i| (i, c[(i, i)])).fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
        let mut best_z = DMatrix::zeros(p, p);
        best_z[(i_max, i_max)] = 1.0;
        let mut lower = d_max;

        if s == 1 {
            // Feasible Z are diagonal (||Z||_1 >= trace(Z) = 1 with equality
            // only off-diagonal-free), so the value is max_i C_ii. The matching
            // certificate strips the off-diagonal part and shifts the diagonal.
            let off = off_diagonal_max(&c);
            let mut y = -c.clone();
            for i in 0..p {
                y[(i, i)] = -off;
            }
            let upper = upper_bound(&c, &y, s);
            return Self::finished(c, s, lower, upper, best_z, y);
        }

        let eig = SymmetricEigen::new(c.clone());
        let k = argmax(eig.eigenvalues.as_slice());
        let lam = eig.eigenvalues[k];
        let v = eig.eigenvectors.column(k).into_owned();
        let l1 = v.iter().map(|x| x.abs()).sum::<f64>();
        if l1 * l1 <= s as f64 {
            // Unconstrained maximizer is feasible; Y = 0 closes the gap.
            let zz = &v * v.transpose();
            let value = c.dot(&zz);
            return Self::finished(c, s, value, lam, zz, DMatrix::zeros(p, p));
        }
        let (trunc_val, trunc_z) = truncated_rank_one(&c, &v, s);
        if trunc_val > lower {
            lower = trunc_val;
            best_z = trunc_z;
        }

        let mut upper = lam;
        let mut best_y = DMatrix::zeros(p, p);
        let (mu, mu_bound) = shrinkage_line_search(&c, s);
        if mu_bound < upper {
            upper = mu_bound;
            best_y = -clip(&c, mu);
        }

        let rho = 1.0;
        Self {
            u: -&best_y / rho,
            w: best_z.clone(),
            z: best_z.clone(),
            c,
            s,
            rho,
            top: None,
            lower,
            upper,
            best_z,
            best_y,
            iterations: 0,
        }
    }

    fn finished(c: DMatrix<f64>, s: usize, lower: f64, upper: f64, z: DMatrix<f64>, y: DMatrix<f64>) -> Self {
        let p = c.nrows();
        Self {
            z: z.clone(),
            w: z.clone(),
            u: DMatrix::zeros(p, p),
            c,
            s,
            rho: 1.0,
            top: None,
            lower,
            upper: upper.max(lower),
            best_z: z,
            best_y: y,
            iterations: 0,
        }
    }

    fn run(&mut self, steps: usize) {
        for _ in 0..steps {
            self.step();
        }
        self.check();
    }

    fn step(&mut self) {
        let arg = &self.w - &self.u + &self.c / self.rho;
        let (z, top) = project_spectraplex(arg);
        self.z = z;
        self.top = Some(top);
        let w_prev = std::mem::replace(&mut self.w, project_l1_ball(&(&self.z + &self.u), self.s as f64));
        self.u += &self.z - &self.w;
        self.iterations += 1;

        let primal = (&self.z - &self.w).norm();
        let dual = self.rho * (&self.w - &w_prev).norm();
        if primal > RESIDUAL_RATIO * dual {
            self.rho *= RHO_FACTOR;
            self.u /= RHO_FACTOR;
        } else if dual > RESIDUAL_RATIO * primal {
            self.rho /= RHO_FACTOR;
            self.u *= RHO_FACTOR;
        }
    }

    fn check(&mut self) {
        let (val, zf) = shrink_off_diagonal(&self.c, &self.z, self.s as f64);
        if val > self.lower {
            self.lower = val;
            self.best_z = zf;
        }
        if let Some(top) = &self.top {
            let (val, zr) = truncated_rank_one(&self.c, top, self.s);
            if val > self.lower {
                self.lower = val;
                self.best_z = zr;
            }
        }
        let y = &self.u * (-self.rho);
        let ub = upper_bound(&self.c, &y, self.s);
        if ub < self.upper {
            self.upper = ub;
            self.best_y = y;
        }
    }
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
}

fn off_diagonal_max(c: &DMatrix<f64>) -> f64 {
    let p = c.nrows();
    let mut m = 0.0_f64;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                m = m.max(c[(i, j)].abs());
            }
        }
    }
    m
}

fn upper_bound(c: &DMatrix<f64>, y: &DMatrix<f64>, s: usize) -> f64 {
    let m = c + y;
    let lam = m
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    lam + s as f64 * y.amax()
}

/// Entrywise clipping to `[-mu, mu]`.
fn clip(c: &DMatrix<f64>, mu: f64) -> DMatrix<f64> {
    c.map(|v| v.clamp(-mu, mu))
}

/// Minimizes `lambda_max(soft_mu(C)) + s min(mu, ||C||_inf)` over `mu` by
/// golden-section search; `Y = -clip(C, mu)` turns `C + Y` into the soft
/// threshold of `C`.
fn shrinkage_line_search(c: &DMatrix<f64>, s: usize) -> (f64, f64) {
    let hi = c.amax();
    let f = |mu: f64| upper_bound(c, &-clip(c, mu), s);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..LINE_SEARCH_EVALS.saturating_sub(2) {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Euclidean projection onto `{Z PSD, trace(Z) = 1}`; also returns the top eigenvector.
fn project_spectraplex(m: DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let w = project_simplex(eig.eigenvalues.as_slice());
    let p = w.len();
    let mut z = DMatrix::zeros(p, p);
    for (k, &wk) in w.iter().enumerate() {
        if wk > 0.0 {
            let v = eig.eigenvectors.column(k);
            z.ger(wk, &v, &v, 1.0);
        }
    }
    let k = argmax(&w);
    (z, eig.eigenvectors.column(k).into_owned())
}

/// Projection of a vector onto the probability simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Entrywise projection onto `{||W||_1 <= radius}`; preserves symmetry.
fn project_l1_ball(m: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    let total: f64 = m.iter().map(|v| v.abs()).sum();
    if total <= radius {
        return m.clone();
    }
    let mut mags: Vec<f64> = m.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in mags.iter().enumerate() {
        cum += x;
        let t = (cum - radius) / (k + 1) as f64;
        if x > t {
            theta = t;
        } else {
            break;
        }
    }
    m.map(|v| v.signum() * (v.abs() - theta).max(0.0))
}

/// Makes a spectraplex point l1-feasible by shrinking its off-diagonal part:
/// `(1 - theta) Z + theta diag(Z)` stays PSD with unit trace.
fn shrink_off_diagonal(c: &DMatrix<f64>, z: &DMatrix<f64>, s: f64) -> (f64, DMatrix<f64>) {
    let p = z.nrows();
    let diag_l1: f64 = (0..p).map(|i| z[(i, i)].abs()).sum();
    let off_l1 = z.iter().map(|v| v.abs()).sum::<f64>() - diag_l1;
    let mut out = z.clone();
    if diag_l1 + off_l1 > s {
        // diag_l1 = trace(Z) = 1 up to rounding.
        let keep = ((s - diag_l1) / off_l1).clamp(0.0, 1.0) * (1.0 - 4.0 * f64::EPSILON);
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    out[(i, j)] *= keep;
                }
            }
        }
    }
    (c.dot(&out), out)
}

/// Keeps the `s` largest-magnitude entries of `v`, renormalizes, and returns
/// the objective at the rank-one point `v v^T` (always feasible).
fn truncated_rank_one(c: &DMatrix<f64>, v: &DVector<f64>, s: usize) -> (f64, DMatrix<f64>) {
    let p = v.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()).then(i.cmp(&j)));
    let mut t = DVector::zeros(p);
    for &i in order.iter().take(s) {
        t[i] = v[i];
    }
    let norm = t.norm();
    if norm == 0.0 {
        let mut z = DMatrix::zeros(p, p);
        z[(order[0], order[0])] = 1.0;
        return (c[(order[0], order[0])], z);
    }
    t /= norm;
    let z = &t * t.transpose();
    (c.dot(&z), z)
}
