//! Exponential relaxation `y' + rate y = phi`, `y(0) = 0` and its backward
//! mirror `-y' + rate y = psi`, `y(T) = 0`.
//!
//! The source is reconstructed as piecewise linear on each step and the
//! resulting ODE is integrated exactly:
//! `y_{k+1} = e^{-rate dt} y_k + w0 phi_k + w1 phi_{k+1}`.

use alloc::vec::Vec;

use super::{TimeGrid, TimeSeries};
use crate::error::{Error, Result};
use crate::math;

/// Step weights of the exact exponential integrator for one rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpWeights {
    pub decay: f64,
    pub w0: f64,
    pub w1: f64,
}

impl ExpWeights {
    pub fn new(rate: f64, dt: f64) -> Self {
        let z = rate * dt;
        // phi1(z) = (1 - e^{-z})/z,  phi0(z) = (1 - e^{-z}(1+z))/z^2
        let (phi1, phi0) = if z < 1e-3 {
            let z2 = z * z;
            (
                1.0 - z / 2.0 + z2 / 6.0 - z2 * z / 24.0 + z2 * z2 / 120.0,
                0.5 - z / 3.0 + z2 / 8.0 - z2 * z / 30.0 + z2 * z2 / 144.0,
            )
        } else {
            let one_minus = -math::expm1(-z);
            (one_minus / z, (one_minus - z * math::exp(-z)) / (z * z))
        };
        ExpWeights { decay: math::exp(-z), w0: dt * phi0, w1: dt * (phi1 - phi0) }
    }

    pub fn forward(&self, phi: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(phi.len());
        let mut acc = 0.0;
        y.push(0.0);
        for k in 0..phi.len() - 1 {
            acc = self.decay * acc + self.w0 * phi[k] + self.w1 * phi[k + 1];
            y.push(acc);
        }
        y
    }

    pub fn backward(&self, psi: &[f64]) -> Vec<f64> {
        let n = psi.len() - 1;
        let mut y = alloc::vec![0.0; n + 1];
        let mut acc = 0.0;
        for k in (0..n).rev() {
            acc = self.decay * acc + self.w0 * psi[k + 1] + self.w1 * psi[k];
            y[k] = acc;
        }
        y
    }

    /// Transpose of [`Self::forward`] in the Euclidean dot product.
    pub fn forward_transpose(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len() - 1;
        // lam_m = sum_{k >= m} decay^{k-m} g_k for m = 1..=n
        let mut lam = alloc::vec![0.0; n + 2];
        for m in (1..=n).rev() {
            lam[m] = g[m] + self.decay * lam[m + 1];
        }
        (0..=n)
            .map(|j| {
                let mut z = 0.0;
                if j < n {
                    z += self.w0 * lam[j + 1];
                }
                if j >= 1 {
                    z += self.w1 * lam[j];
                }
                z
            })
            .collect()
    }

    /// Transpose of [`Self::backward`].
    pub fn backward_transpose(&self, g: &[f64]) -> Vec<f64> {
        let mut r = g.to_vec();
        r.reverse();
        let mut z = self.forward_transpose(&r);
        z.reverse();
        z
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "rate", reason: alloc::format!("must be positive, got {rate}") })
    }
}

/// `y' + rate y = phi`, `y(0) = 0`. `M` is the case `rate = Bn`, `G` the
/// case `rate = mu`.
pub fn relax_forward(phi: &TimeSeries, rate: f64) -> Result<TimeSeries> {
    check_rate(rate)?;
    let grid: TimeGrid = *phi.grid();
    let w = ExpWeights::new(rate, grid.dt());
    Ok(TimeSeries::with_values(grid, w.forward(phi.values())))
}

/// `-y' + rate y = psi`, `y(T) = 0`. `M*` for `rate = Bn`, `G*` for `rate = mu`.
pub fn relax_backward(psi: &TimeSeries, rate: f64) -> Result<TimeSeries> {
    check_rate(rate)?;
    let grid: TimeGrid = *psi.grid();
    let w = ExpWeights::new(rate, grid.dt());
    Ok(TimeSeries::with_values(grid, w.backward(psi.values())))
}
