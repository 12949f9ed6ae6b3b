//! Tridiagonal systems `A x = d` by the Thomas algorithm.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Tridiagonal matrix stored by diagonals. `sub[i]` multiplies `x[i-1]` in
/// row `i` (`sub[0]` unused), `sup[i]` multiplies `x[i+1]` (`sup[n-1]` unused).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Tridiagonal { sub: vec![0.0; n], diag: vec![0.0; n], sup: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.sup[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn transpose(&self) -> Self {
        let n = self.len();
        let mut t = Tridiagonal::zeros(n);
        t.diag.copy_from_slice(&self.diag);
        for i in 0..n.saturating_sub(1) {
            t.sup[i] = self.sub[i + 1];
            t.sub[i + 1] = self.sup[i];
        }
        t
    }

    pub fn factor(&self) -> Result<Factored> {
        let n = self.len();
        let mut c = vec![0.0; n];
        let mut inv = vec![0.0; n];
        let mut prev_c = 0.0;
        for i in 0..n {
            let l = if i > 0 { self.sub[i] } else { 0.0 };
            let pivot = self.diag[i] - l * prev_c;
            if !(math::abs(pivot) > 1e-300) || !pivot.is_finite() {
                return Err(Error::SingularSystem("tridiagonal solve"));
            }
            inv[i] = 1.0 / pivot;
            c[i] = if i + 1 < n { self.sup[i] * inv[i] } else { 0.0 };
            prev_c = c[i];
        }
        Ok(Factored { sub: self.sub.clone(), c, inv })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let f = self.factor()?;
        let mut x = rhs.to_vec();
        f.solve_in_place(&mut x);
        Ok(x)
    }
}

/// LU factors from forward elimination, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct Factored {
    sub: Vec<f64>,
    c: Vec<f64>,
    inv: Vec<f64>,
}

impl Factored {
    pub fn len(&self) -> usize {
        self.inv.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv.is_empty()
    }

    pub fn solve_in_place(&self, d: &mut [f64]) {
        let n = self.len();
        debug_assert_eq!(d.len(), n);
        let mut prev = 0.0;
        for i in 0..n {
            let l = if i > 0 { self.sub[i] } else { 0.0 };
            d[i] = (d[i] - l * prev) * self.inv[i];
            prev = d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= self.c[i] * d[i + 1];
        }
    }
}
