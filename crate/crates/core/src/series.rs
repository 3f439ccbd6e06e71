//! Time-major data panels and their end-window second moments.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::matrix::SymMatrix;

/// An `n x p` panel of observations, one row per time point.
///
/// The model assumes mean-zero rows; [`Series::centered`] is available for
/// data that are not.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
    n: usize,
    p: usize,
}

impl Series {
    /// Builds a series from row-major values.
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("series needs n >= 2 rows, got {n}")));
        }
        if p < 1 {
            return Err(invalid("series needs p >= 1 columns"));
        }
        if values.len() != n * p {
            return Err(invalid(format!(
                "expected {} values for a {n}x{p} series, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at row {}, column {}", k / p, k % p)));
        }
        Ok(Self { values, n, p })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != p) {
            return Err(invalid(format!("row {i} has a different length than row 0")));
        }
        Self::new(rows.concat(), rows.len(), p)
    }

    /// A univariate series.
    pub fn univariate(x: &[f64]) -> Result<Self> {
        Self::new(x.to_vec(), x.len(), 1)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.p, &self.values)
    }

    /// Subtracts the global column means.
    pub fn centered(&self) -> Self {
        let mut mean = vec![0.0; self.p];
        for i in 0..self.n {
            for (m, v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= self.n as f64;
        }
        let values = self
            .values
            .chunks(self.p)
            .flat_map(|r| r.iter().zip(&mean).map(|(v, m)| v - m))
            .collect();
        Self {
            values,
            n: self.n,
            p: self.p,
        }
    }

    /// The same observations in reverse time order.
    pub fn reversed(&self) -> Self {
        let values = self.values.chunks(self.p).rev().flatten().copied().collect();
        Self {
            values,
            n: self.n,
            p: self.p,
        }
    }

    /// Multiplies every observation by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            n: self.n,
            p: self.p,
        }
    }

    /// Reorders coordinates: column `j` of the output is column `perm[j]` of `self`.
    pub fn permuted_columns(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.p];
        if perm.len() != self.p
            || perm
                .iter()
                .any(|&k| k >= self.p || std::mem::replace(&mut seen[k], true))
        {
            return Err(invalid("not a permutation of the series columns"));
        }
        let values = self
            .values
            .chunks(self.p)
            .flat_map(|r| perm.iter().map(move |&k| r[k]))
            .collect();
        Ok(Self {
            values,
            n: self.n,
            p: self.p,
        })
    }

    fn check_window(&self, t: usize) -> Result<()> {
        if t < 1 || t > self.n / 2 {
            return Err(invalid(format!(
                "window length t = {t} must lie in [1, floor(n/2) = {}]",
                self.n / 2
            )));
        }
        Ok(())
    }
}

fn accumulate_outer(acc: &mut [f64], x: &[f64]) {
    let p = x.len();
    for i in 0..p {
        let xi = x[i];
        let row = &mut acc[i * p..];
        for j in i..p {
            row[j] += xi * x[j];
        }
    }
}

fn finish(acc: &[f64], p: usize, t: usize) -> SymMatrix {
    let inv = 1.0 / t as f64;
    SymMatrix::symmetrized(DMatrix::from_fn(p, p, |i, j| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        acc[a * p + b] * inv
    }))
}

/// `(1/t) sum_{i<=t} X_i X_i^T` over the first `t` rows.
pub fn prefix_covariance(x: &Series, t: usize) -> Result<SymMatrix> {
    x.check_window(t)?;
    let mut acc = vec![0.0; x.p * x.p];
    for i in 0..t {
        accumulate_outer(&mut acc, x.row(i));
    }
    Ok(finish(&acc, x.p, t))
}

/// `(1/t) sum_{i<=t} X_{n-i+1} X_{n-i+1}^T` over the last `t` rows.
pub fn suffix_covariance(x: &Series, t: usize) -> Result<SymMatrix> {
    x.check_window(t)?;
    let mut acc = vec![0.0; x.p * x.p];
    for i in 0..t {
        accumulate_outer(&mut acc, x.row(x.n - 1 - i));
    }
    Ok(finish(&acc, x.p, t))
}

/// Prefix and suffix second-moment matrices at a set of window lengths,
/// computed from one running sum per side.
///
/// Building the table for every length in the dyadic grid costs
/// `O(n p^2)` in total.
#[derive(Debug, Clone)]
pub struct EndMoments {
    lengths: Vec<usize>,
    prefix: Vec<SymMatrix>,
    suffix: Vec<SymMatrix>,
    accumulations: u64,
}

impl EndMoments {
    pub fn new(x: &Series, lengths: &[usize]) -> Result<Self> {
        let mut lengths = lengths.to_vec();
        lengths.sort_unstable();
        lengths.dedup();
        for &t in &lengths {
            x.check_window(t)?;
        }
        let p = x.p;
        let mut accumulations = 0u64;
        let mut sweep = |row_at: &dyn Fn(usize) -> usize| {
            let mut acc = vec![0.0; p * p];
            let mut out = Vec::with_capacity(lengths.len());
            let mut done = 0usize;
            for &t in &lengths {
                while done < t {
                    accumulate_outer(&mut acc, x.row(row_at(done)));
                    done += 1;
                    accumulations += 1;
                }
                out.push(finish(&acc, p, t));
            }
            out
        };
        let prefix = sweep(&|i| i);
        let suffix = sweep(&|i| x.n - 1 - i);
        Ok(Self {
            lengths,
            prefix,
            suffix,
            accumulations,
        })
    }

    fn index(&self, t: usize) -> Result<usize> {
        self.lengths
            .binary_search(&t)
            .map_err(|_| invalid(format!("window length {t} was not tabulated")))
    }

    pub fn prefix(&self, t: usize) -> Result<&SymMatrix> {
        Ok(&self.prefix[self.index(t)?])
    }

    pub fn suffix(&self, t: usize) -> Result<&SymMatrix> {
        Ok(&self.suffix[self.index(t)?])
    }

    /// `prefix(t) - suffix(t)`.
    pub fn difference(&self, t: usize) -> Result<SymMatrix> {
        let k = self.index(t)?;
        self.prefix[k].sub(&self.suffix[k])
    }

    /// Number of rank-one updates performed while building the table.
    pub fn accumulations(&self) -> u64 {
        self.accumulations
    }
}
