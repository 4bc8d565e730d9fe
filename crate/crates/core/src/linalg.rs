//! Banded sparse matrices and a direct LU solver with partial pivoting.
//!
//! Structured grids numbered row-major give Jacobians whose nonzeros lie
//! within `nx · block + block - 1` of the diagonal, so a banded
//! factorisation is an exact direct solve at `O(n · bw²)` cost.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    /// Lower bandwidth.
    kl: usize,
    /// Upper bandwidth (before pivoting fill-in).
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        // room for kl extra superdiagonals created by row interchanges
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> usize {
        debug_assert!(col + self.kl >= row && col <= row + self.kl + self.ku);
        row * self.width + (col + self.kl - row)
    }

    pub fn in_band(&self, row: usize, col: usize) -> bool {
        row < self.n && col < self.n && col + self.kl >= row && col <= row + self.ku
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        if self.in_band(row, col) {
            self.data[self.slot(row, col)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry `(row, col)`; panics outside the band.
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        assert!(
            self.in_band(row, col),
            "entry ({row}, {col}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.slot(row, col);
        self.data[k] += v;
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        assert!(self.in_band(row, col));
        let k = self.slot(row, col);
        self.data[k] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).map(|c| self.get(r, c) * x[c]).sum()
            })
            .collect()
    }

    /// Row-major dense copy, for tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|r| (0..self.n).map(|c| self.get(r, c)).collect()).collect()
    }

    /// Nonzero pattern as `(row, col)` pairs.
    pub fn nonzeros(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..self.n {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n.saturating_sub(1));
            for c in lo..=hi {
                if self.get(r, c) != 0.0 {
                    out.push((r, c));
                }
            }
        }
        out
    }

    /// Factorises in place and solves `A x = b`.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let piv = self.factorize()?;
        Ok(self.solve_factored(&piv, b))
    }

    fn factorize(&mut self) -> Result<Vec<usize>> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * 1e-3;
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in (k + 1)..=last_row {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularMatrix { column: k });
            }
            piv[k] = p;
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let a = self.slot(k, c);
                    let b = self.slot(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for r in (k + 1)..=last_row {
                let rk = self.slot(r, k);
                let l = self.data[rk] / pivot;
                self.data[rk] = l;
                if l == 0.0 {
                    continue;
                }
                for c in (k + 1)..=last_col {
                    let kc = self.data[self.slot(k, c)];
                    if kc != 0.0 {
                        let rc = self.slot(r, c);
                        self.data[rc] -= l * kc;
                    }
                }
            }
        }
        Ok(piv)
    }

    fn solve_factored(&self, piv: &[usize], b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let reach = kl + self.ku;
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, piv[k]);
            let xk = x[k];
            if xk != 0.0 {
                for r in (k + 1)..=(k + kl).min(n - 1) {
                    x[r] -= self.data[self.slot(r, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for c in (k + 1)..=(k + reach).min(n - 1) {
                acc -= self.data[self.slot(k, c)] * x[c];
            }
            x[k] = acc / self.data[self.slot(k, k)];
        }
        x
    }
}

/// Infinity norm.
pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
