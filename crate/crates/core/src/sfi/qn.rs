//! Windowed quasi-Newton (Anderson-type) acceleration of the transport
//! fixed-point map `x ↦ 𝒯∘𝒫(x)`.
//!
//! The least-squares problem `min_γ ‖r − ΔR γ‖₂` is solved through a thin QR
//! factorisation of `ΔR` that is updated as columns enter on the right and
//! leave on the left.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, norm_inf};
use crate::newton::project_transport_vector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QnConfig {
    pub enabled: bool,
    /// Window depth.
    pub m: usize,
    pub omega: f64,
    /// Damping of the very first step.
    pub omega0: f64,
    /// Columns whose `R` diagonal falls below `drop_tol · ‖ΔR‖` are dropped.
    pub drop_tol: f64,
}

impl Default for QnConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            m: 3,
            omega: 0.5,
            omega0: 1.0,
            drop_tol: 1e-12,
        }
    }
}

impl QnConfig {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=20).contains(&self.m) {
            return Err(Error::Config(format!("QN window m = {} outside 1..=20", self.m)));
        }
        for (name, w) in [("omega", self.omega), ("omega0", self.omega0)] {
            if !(w > 0.0 && w <= 1.0) {
                return Err(Error::Config(format!("{name} = {w} outside (0, 1]")));
            }
        }
        if !(self.drop_tol >= 0.0) {
            return Err(Error::Config("drop_tol must be non-negative".into()));
        }
        Ok(())
    }
}

/// Thin QR factorisation `A = Q R` stored by columns, with column append and
/// column delete.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThinQr {
    /// Orthonormal columns.
    q: Vec<Vec<f64>>,
    /// `r[j]` is column `j` of the upper-triangular factor (length `j + 1`).
    r: Vec<Vec<f64>>,
}

impl ThinQr {
    pub fn cols(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn r_entry(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self.r[j][i]
        } else {
            0.0
        }
    }

    /// Appends a column using Gram–Schmidt with one re-orthogonalisation.
    pub fn push(&mut self, a: &[f64]) {
        let mut v = a.to_vec();
        let mut coeffs = vec![0.0; self.cols() + 1];
        for _ in 0..2 {
            for (i, qi) in self.q.iter().enumerate() {
                let c = dot(qi, &v);
                coeffs[i] += c;
                v.iter_mut().zip(qi).for_each(|(x, q)| *x -= c * q);
            }
        }
        let nrm = norm2(&v);
        coeffs[self.cols()] = nrm;
        if nrm > 0.0 {
            v.iter_mut().for_each(|x| *x /= nrm);
        }
        self.q.push(v);
        self.r.push(coeffs);
    }

    /// Removes column `k`, restoring triangularity with Givens rotations.
    pub fn remove(&mut self, k: usize) {
        let n = self.cols();
        assert!(k < n);
        self.r.remove(k);
        // columns k.. now have one subdiagonal entry at row j + 1
        for j in k..n - 1 {
            let (a, b) = (self.r[j][j], self.r[j][j + 1]);
            let h = a.hypot(b);
            let (c, s) = if h == 0.0 { (1.0, 0.0) } else { (a / h, b / h) };
            for col in j..n - 1 {
                let (x, y) = (self.r[col][j], self.r[col][j + 1]);
                self.r[col][j] = c * x + s * y;
                self.r[col][j + 1] = -s * x + c * y;
            }
            let (left, right) = self.q.split_at_mut(j + 1);
            for (x, y) in left[j].iter_mut().zip(right[0].iter_mut()) {
                let (u, w) = (*x, *y);
                *x = c * u + s * w;
                *y = -s * u + c * w;
            }
            self.r[j].truncate(j + 1);
        }
        self.q.pop();
    }

    /// Solves `R γ = Qᵀ b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.cols();
        let mut g: Vec<f64> = self.q.iter().map(|qi| dot(qi, b)).collect();
        for i in (0..n).rev() {
            let mut acc = g[i];
            for j in i + 1..n {
                acc -= self.r[j][i] * g[j];
            }
            g[i] = acc / self.r[i][i];
        }
        g
    }
}

/// History of the accelerated iteration.
#[derive(Debug, Clone)]
pub struct QnWorkspace {
    cfg: QnConfig,
    /// Saturation unknowns per cell, for the final projection.
    n_sat: usize,
    dx: VecDeque<Vec<f64>>,
    dr: VecDeque<Vec<f64>>,
    qr: ThinQr,
    prev_x: Option<Vec<f64>>,
    prev_r: Option<Vec<f64>>,
    /// Columns dropped for conditioning, for diagnostics.
    pub dropped: usize,
}

impl QnWorkspace {
    pub fn new(cfg: QnConfig, n_sat: usize) -> Self {
        Self {
            cfg,
            n_sat,
            dx: VecDeque::new(),
            dr: VecDeque::new(),
            qr: ThinQr::default(),
            prev_x: None,
            prev_r: None,
            dropped: 0,
        }
    }

    pub fn columns(&self) -> usize {
        self.qr.cols()
    }

    pub fn qr(&self) -> &ThinQr {
        &self.qr
    }

    pub fn delta_r(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.dr.iter()
    }

    /// Accelerated iterate from `x^ν` and the plain SFI output `x̃^{ν+1}`.
    pub fn update(&mut self, x: &[f64], x_tilde: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = x_tilde.iter().zip(x).map(|(a, b)| a - b).collect();
        let mut out = match (self.prev_x.take(), self.prev_r.take()) {
            (Some(px), Some(pr)) => {
                let dx: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
                // a pair with Δx = 0 says nothing about the map's Jacobian and
                // would let γ cancel the whole step
                if norm_inf(&dx) > f64::EPSILON * norm_inf(x).max(1.0) {
                    self.push_column(dx, r.iter().zip(&pr).map(|(a, b)| a - b).collect());
                }
                self.accelerated(x, &r)
            }
            _ => x.iter().zip(&r).map(|(a, b)| a + self.cfg.omega0 * b).collect(),
        };
        self.prev_x = Some(x.to_vec());
        self.prev_r = Some(r);
        project_transport_vector(&mut out, self.n_sat);
        out
    }

    fn push_column(&mut self, dx: Vec<f64>, dr: Vec<f64>) {
        self.qr.push(&dr);
        self.dx.push_back(dx);
        self.dr.push_back(dr);
        if self.dx.len() > self.cfg.m {
            self.remove(0);
        }
        self.drop_ill_conditioned();
    }

    fn remove(&mut self, k: usize) {
        self.qr.remove(k);
        self.dx.remove(k);
        self.dr.remove(k);
    }

    fn drop_ill_conditioned(&mut self) {
        loop {
            let scale = self.dr.iter().map(|c| dot(c, c)).sum::<f64>().sqrt();
            let bad = (0..self.qr.cols()).find(|&j| !(self.qr.r_entry(j, j).abs() > self.cfg.drop_tol * scale));
            match bad {
                Some(j) => {
                    self.remove(j);
                    self.dropped += 1;
                }
                None => break,
            }
        }
    }

    fn accelerated(&self, x: &[f64], r: &[f64]) -> Vec<f64> {
        let w = self.cfg.omega;
        let mut out: Vec<f64> = x.iter().zip(r).map(|(a, b)| a + w * b).collect();
        if self.qr.cols() == 0 {
            return out;
        }
        let gamma = self.qr.solve(r);
        for (g, (dx, dr)) in gamma.iter().zip(self.dx.iter().zip(&self.dr)) {
            for (o, (a, b)) in out.iter_mut().zip(dx.iter().zip(dr)) {
                *o -= g * (a + w * b);
            }
        }
        out
    }

    /// Least-squares coefficients for residual `r` against the current window.
    pub fn gamma(&self, r: &[f64]) -> Vec<f64> {
        self.qr.solve(r)
    }
}
