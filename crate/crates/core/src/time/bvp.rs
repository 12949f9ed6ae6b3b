//! Two-point problems `-A'' + kappa A = phi` with one Robin and one
//! Dirichlet end.
//!
//! * [`BvpSide::RobinAtStart`]: `A(T) = 0`, `-A'(0) + mu A(0) = 0`
//!   (this is `G*(H(phi))`).
//! * [`BvpSide::RobinAtEnd`]: `A(0) = 0`, `A'(T) + mu A(T) = 0`
//!   (this is `H(G*(phi))`).
//!
//! The interior uses the 3-point second difference. The Robin condition is
//! imposed with the same one-sided second-order stencil as
//! [`super::derivative`], so `-D A + mu A` vanishes at the Robin end up to
//! round-off. Eliminating the third unknown of that row with the first
//! interior row keeps the matrix tridiagonal.

use alloc::vec::Vec;

use crate::error::Result;
use crate::tridiag::{Factored, Tridiagonal};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BvpSide {
    RobinAtStart,
    RobinAtEnd,
}

#[derive(Debug, Clone)]
pub struct RobinBvp {
    side: BvpSide,
    dt: f64,
    matrix: Tridiagonal,
    lu: Factored,
    lu_t: Factored,
}

impl RobinBvp {
    pub fn new(side: BvpSide, kappa: f64, mu: f64, dt: f64, nt: usize) -> Result<Self> {
        let n = nt + 1;
        let h = dt;
        let mut a = Tridiagonal::zeros(n);
        let inv_h2 = 1.0 / (h * h);
        for k in 1..nt {
            a.sub[k] = -inv_h2;
            a.diag[k] = 2.0 * inv_h2 + kappa;
            a.sup[k] = -inv_h2;
        }
        let robin_diag = 1.0 / h + mu;
        let robin_off = -1.0 / h + 0.5 * h * kappa;
        match side {
            BvpSide::RobinAtStart => {
                a.diag[0] = robin_diag;
                a.sup[0] = robin_off;
                a.diag[nt] = 1.0;
            }
            BvpSide::RobinAtEnd => {
                a.diag[0] = 1.0;
                a.diag[nt] = robin_diag;
                a.sub[nt] = robin_off;
            }
        }
        let lu = a.factor()?;
        let lu_t = a.transpose().factor()?;
        Ok(RobinBvp { side, dt, matrix: a, lu, lu_t })
    }

    pub fn side(&self) -> BvpSide {
        self.side
    }

    pub fn matrix(&self) -> &Tridiagonal {
        &self.matrix
    }

    fn assemble(&self, phi: &[f64]) -> Vec<f64> {
        let nt = phi.len() - 1;
        let mut r = phi.to_vec();
        match self.side {
            BvpSide::RobinAtStart => {
                r[0] = 0.5 * self.dt * phi[1];
                r[nt] = 0.0;
            }
            BvpSide::RobinAtEnd => {
                r[0] = 0.0;
                r[nt] = 0.5 * self.dt * phi[nt - 1];
            }
        }
        r
    }

    fn assemble_transpose(&self, z: &[f64]) -> Vec<f64> {
        let nt = z.len() - 1;
        let mut r = z.to_vec();
        r[0] = 0.0;
        r[nt] = 0.0;
        match self.side {
            BvpSide::RobinAtStart => r[1] += 0.5 * self.dt * z[0],
            BvpSide::RobinAtEnd => r[nt - 1] += 0.5 * self.dt * z[nt],
        }
        r
    }

    pub fn solve(&self, phi: &[f64]) -> Vec<f64> {
        let mut r = self.assemble(phi);
        self.lu.solve_in_place(&mut r);
        r
    }

    /// Transpose of [`Self::solve`] as a linear map on node values.
    pub fn solve_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut z = y.to_vec();
        self.lu_t.solve_in_place(&mut z);
        self.assemble_transpose(&z)
    }
}
