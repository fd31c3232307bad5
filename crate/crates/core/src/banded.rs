//! Banded LU factorization with partial pivoting.
//!
//! Storage is row-wise: row `i` keeps columns `i - ml ..= i + mu + ml`, the
//! extra `ml` upper diagonals absorb fill-in from row interchanges.

use nalgebra::DMatrix;

use crate::error::{OcpError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        let width = 2 * lower + upper + 1;
        Self {
            n,
            lower,
            upper,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.lower, self.upper)
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let offset = j as isize - i as isize + self.lower as isize;
        (i < self.n && j < self.n && offset >= 0 && (offset as usize) < self.width)
            .then(|| i * self.width + offset as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `value` at `(i, j)`. Panics if the entry lies outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let inside = j + self.lower >= i && j <= i + self.upper;
        assert!(
            inside,
            "entry ({i}, {j}) outside band (lower {}, upper {})",
            self.lower, self.upper
        );
        let k = self.slot(i, j).expect("index within matrix");
        self.data[k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = self.slot(i, j).expect("index within band storage");
        self.data[k] = value;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.lower);
                let hi = (i + self.upper + self.lower + 1).min(self.n);
                (lo..hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Factorizes in place. Fails on a zero or non-finite pivot, reporting its row.
    pub fn factorize(mut self) -> Result<BandedLu> {
        let n = self.n;
        let ml = self.lower;
        let reach = ml + self.upper;
        let mut pivots = vec![0usize; n];
        let mut multipliers = vec![0.0; n * ml.max(1)];

        for k in 0..n {
            let last_row = (k + ml).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last_row {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best.is_finite() && best > 0.0) {
                return Err(OcpError::SingularSystem {
                    pivot: k,
                    gamma_dt: None,
                });
            }
            pivots[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.get(k, j);
                    let b = self.get(p, j);
                    self.set(k, j, b);
                    self.set(p, j, a);
                }
            }
            let diag = self.get(k, k);
            for i in k + 1..=last_row {
                let factor = self.get(i, k) / diag;
                multipliers[k * ml + (i - k - 1)] = factor;
                if factor == 0.0 {
                    continue;
                }
                self.set(i, k, 0.0);
                for j in k + 1..=last_col {
                    let v = self.get(i, j) - factor * self.get(k, j);
                    self.set(i, j, v);
                }
            }
        }
        Ok(BandedLu {
            factors: self,
            multipliers,
            pivots,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandedLu {
    factors: BandedMatrix,
    multipliers: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let a = &self.factors;
        let n = a.n;
        let ml = a.lower;
        let reach = ml + a.upper;
        if rhs.len() != n {
            return Err(OcpError::Contract(format!(
                "right-hand side has length {}, matrix has dimension {n}",
                rhs.len()
            )));
        }
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for i in k + 1..=(k + ml).min(n - 1) {
                x[i] -= self.multipliers[k * ml + (i - k - 1)] * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= a.get(k, j) * x[j];
            }
            x[k] = s / a.get(k, k);
        }
        Ok(x)
    }
}

/// Factorizes and solves `A x = b` in one call.
pub fn solve_banded(matrix: BandedMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    matrix.factorize()?.solve(rhs)
}
