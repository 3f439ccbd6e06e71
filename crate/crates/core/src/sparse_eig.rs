//! Exact largest absolute `s`-sparse eigenvalue by support enumeration.
//!
//! `lambda_max^s(A) = sup { |v^T A v| : ||v||_2 = 1, ||v||_0 <= s }` is the
//! largest absolute eigenvalue over all `s x s` principal submatrices of `A`.
//! The cost is `C(p, s)` small eigenproblems, which is only practical for
//! moderate `p`; past the budget the relaxation in [`crate::sdp`] applies.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matrix::SymMatrix;

/// Default cap on the number of enumerated supports.
pub const DEFAULT_BUDGET: u64 = 2_000_000;

// Below this many supports the enumeration stays on the calling thread.
const PARALLEL_THRESHOLD: u128 = 50_000;

/// Result of [`sparse_abs_eigmax`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseEigResult {
    pub value: f64,
    /// Zero-based indices of the winning principal submatrix.
    pub support: Vec<usize>,
    /// Unit vector supported on `support`, first nonzero entry positive.
    pub vector: Vec<f64>,
}

/// `C(p, s)`, saturating at `u128::MAX`.
pub fn binomial(p: usize, s: usize) -> u128 {
    if s > p {
        return 0;
    }
    let s = s.min(p - s);
    let mut acc: u128 = 1;
    for i in 0..s {
        acc = match acc.checked_mul((p - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Largest absolute eigenvalue of the principal submatrix on `idx`.
fn submatrix_abs_eig(a: &DMatrix<f64>, idx: &[usize], buf: &mut DMatrix<f64>) -> f64 {
    match idx.len() {
        1 => a[(idx[0], idx[0])].abs(),
        2 => {
            let (x, y, b) = (a[(idx[0], idx[0])], a[(idx[1], idx[1])], a[(idx[0], idx[1])]);
            let m = 0.5 * (x + y);
            let r = (0.5 * (x - y)).hypot(b);
            m.abs() + r
        }
        k => {
            for i in 0..k {
                for j in 0..k {
                    buf[(i, j)] = a[(idx[i], idx[j])];
                }
            }
            buf.symmetric_eigenvalues().iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        }
    }
}

/// Advances `idx` to the next size-k subset of `0..p` in lexicographic order.
fn next_combination(idx: &mut [usize], p: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < p - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone)]
struct Best {
    value: f64,
    support: Vec<usize>,
}

impl Best {
    // Larger value wins; on exact ties the lexicographically smaller support.
    fn better(self, other: Self) -> Self {
        if other.value > self.value || (other.value == self.value && other.support < self.support) {
            other
        } else {
            self
        }
    }
}

/// Scans all subsets whose first element is `first`, in lexicographic order.
fn scan_from(a: &DMatrix<f64>, s: usize, first: usize) -> Option<Best> {
    let p = a.nrows();
    if first + s > p {
        return None;
    }
    let mut idx: Vec<usize> = (first..first + s).collect();
    let mut buf = DMatrix::zeros(s, s);
    let mut best = Best {
        value: submatrix_abs_eig(a, &idx, &mut buf),
        support: idx.clone(),
    };
    while next_combination(&mut idx, p) && idx[0] == first {
        let v = submatrix_abs_eig(a, &idx, &mut buf);
        if v > best.value {
            best = Best {
                value: v,
                support: idx.clone(),
            };
        }
    }
    Some(best)
}

/// Exact `lambda_max^s(A)` with the default enumeration budget.
pub fn sparse_abs_eigmax(a: &SymMatrix, s: usize) -> Result<SparseEigResult> {
    sparse_abs_eigmax_with_budget(a, s, DEFAULT_BUDGET)
}

pub fn sparse_abs_eigmax_with_budget(a: &SymMatrix, s: usize, budget: u64) -> Result<SparseEigResult> {
    let p = a.dim();
    if s < 1 || s > p {
        return Err(invalid(format!("sparsity s = {s} must lie in [1, p = {p}]")));
    }
    let subsets = binomial(p, s);
    if subsets > budget as u128 {
        return Err(Error::BudgetExceeded { p, s, subsets, budget });
    }
    let m = a.as_matrix();
    let firsts = 0..=(p - s);
    let best = if subsets >= PARALLEL_THRESHOLD {
        firsts
            .into_par_iter()
            .filter_map(|f| scan_from(m, s, f))
            .reduce_with(Best::better)
    } else {
        firsts.filter_map(|f| scan_from(m, s, f)).reduce(Best::better)
    }
    .expect("at least one support");

    let sub = a.principal(&best.support);
    let eig = sub.eigen();
    let k = (0..s)
        .max_by(|&i, &j| {
            let (x, y) = (eig.eigenvalues[i], eig.eigenvalues[j]);
            x.abs().total_cmp(&y.abs()).then(x.total_cmp(&y))
        })
        .expect("nonempty");
    let mut vector = vec![0.0; p];
    let col = eig.eigenvectors.column(k);
    let norm = col.norm();
    for (pos, &i) in best.support.iter().enumerate() {
        vector[i] = col[pos] / norm;
    }
    if let Some(first) = vector.iter().find(|v| **v != 0.0) {
        if *first < 0.0 {
            vector.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(SparseEigResult {
        value: best.value,
        support: best.support,
        vector,
    })
}

/// Largest absolute eigenvalue, `lambda_max^p(A)`.
pub fn operator_norm(a: &SymMatrix) -> f64 {
    a.operator_norm()
}
