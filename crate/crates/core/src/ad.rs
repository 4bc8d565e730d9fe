//! Forward-mode values carrying derivatives with respect to the unknowns of
//! the two cells of a face (at most `MAX_LOCAL` of them).
//!
//! Property laws supply their own analytic derivatives; `Local` only applies
//! the chain rule when those are combined into fluxes and residual rows.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use crate::MAX_PHASES;

pub(crate) const MAX_LOCAL: usize = 2 * MAX_PHASES;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Local {
    pub v: f64,
    pub d: [f64; MAX_LOCAL],
}

impl Local {
    pub const ZERO: Local = Local { v: 0.0, d: [0.0; MAX_LOCAL] };

    pub fn constant(v: f64) -> Self {
        Local { v, d: [0.0; MAX_LOCAL] }
    }

    pub fn variable(v: f64, slot: usize) -> Self {
        let mut d = [0.0; MAX_LOCAL];
        d[slot] = 1.0;
        Local { v, d }
    }

    /// `f(self)` given `f` and `f'` evaluated at `self.v`.
    pub fn chain(self, f: f64, df: f64) -> Self {
        let mut d = self.d;
        d.iter_mut().for_each(|x| *x *= df);
        Local { v: f, d }
    }

    /// Moves derivatives from slots `0..width` to `offset..offset + width`.
    pub fn shifted(self, width: usize, offset: usize) -> Self {
        if offset == 0 {
            return self;
        }
        let mut d = [0.0; MAX_LOCAL];
        d[offset..offset + width].copy_from_slice(&self.d[..width]);
        Local { v: self.v, d }
    }

    pub fn scale(self, k: f64) -> Self {
        let mut d = self.d;
        d.iter_mut().for_each(|x| *x *= k);
        Local { v: self.v * k, d }
    }
}

impl Add for Local {
    type Output = Local;
    fn add(mut self, o: Local) -> Local {
        self.v += o.v;
        for (a, b) in self.d.iter_mut().zip(o.d) {
            *a += b;
        }
        self
    }
}

impl Sub for Local {
    type Output = Local;
    fn sub(mut self, o: Local) -> Local {
        self.v -= o.v;
        for (a, b) in self.d.iter_mut().zip(o.d) {
            *a -= b;
        }
        self
    }
}

impl Mul for Local {
    type Output = Local;
    fn mul(self, o: Local) -> Local {
        let mut d = [0.0; MAX_LOCAL];
        for (k, x) in d.iter_mut().enumerate() {
            *x = self.d[k] * o.v + self.v * o.d[k];
        }
        Local { v: self.v * o.v, d }
    }
}

impl Div for Local {
    type Output = Local;
    fn div(self, o: Local) -> Local {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; MAX_LOCAL];
        for (k, x) in d.iter_mut().enumerate() {
            *x = (self.d[k] - q * o.d[k]) * inv;
        }
        Local { v: q, d }
    }
}

impl Neg for Local {
    type Output = Local;
    fn neg(self) -> Local {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Local {
    type Output = Local;
    fn mul(self, k: f64) -> Local {
        self.scale(k)
    }
}

impl Add<f64> for Local {
    type Output = Local;
    fn add(mut self, k: f64) -> Local {
        self.v += k;
        self
    }
}

impl AddAssign for Local {
    fn add_assign(&mut self, o: Local) {
        *self = *self + o;
    }
}

impl SubAssign for Local {
    fn sub_assign(&mut self, o: Local) {
        *self = *self - o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_rule() {
        let x = Local::variable(3.0, 0);
        let y = Local::variable(2.0, 1);
        let q = (x * x) / y;
        assert_eq!(q.v, 4.5);
        assert_eq!(q.d[0], 3.0);
        assert_eq!(q.d[1], -9.0 / 4.0);
    }

    #[test]
    fn shift_moves_slots() {
        let x = Local::variable(1.0, 1).shifted(2, 2);
        assert_eq!(x.d[1], 0.0);
        assert_eq!(x.d[3], 1.0);
    }
}
