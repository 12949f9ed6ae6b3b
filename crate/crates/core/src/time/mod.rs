//! Scalar functions of time on a uniform grid and the memory operators
//! acting on them.
//!
//! All operators act on the node values `y_k = y(k dt)`, `k = 0..=nt`.
//! Integrals use the trapezoidal rule; derivatives use the centered
//! difference in the interior and one-sided second-order stencils at the
//! two ends.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

mod bvp;
mod ops;
mod relax;

pub use bvp::{BvpSide, RobinBvp};
pub use ops::{apply_h, apply_hstar, bvp_gstar_h, bvp_h_gstar, MemoryOperators, TimeOpTag};
pub use relax::{relax_backward, relax_forward, ExpWeights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    nt: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, nt: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!("time horizon must be positive, got {horizon}")));
        }
        if nt < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 time intervals, got {nt}")));
        }
        Ok(TimeGrid { horizon, nt })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    /// Number of intervals.
    pub fn nt(&self) -> usize {
        self.nt
    }
    /// Number of nodes, `nt + 1`.
    pub fn len(&self) -> usize {
        self.nt + 1
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }
    pub fn node(&self, k: usize) -> f64 {
        if k == self.nt {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }
    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.nt).map(move |k| self.node(k))
    }

    /// Trapezoidal weights.
    pub fn weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let mut w = alloc::vec![dt; self.len()];
        w[0] = 0.5 * dt;
        w[self.nt] = 0.5 * dt;
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch("time series length differs from nt + 1"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time series"));
        }
        Ok(TimeSeries { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        TimeSeries { grid, values: alloc::vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        TimeSeries { grid, values: grid.nodes().map(f).collect() }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Time reversal `t -> T - t`.
    pub fn reversed(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        TimeSeries { grid: self.grid, values }
    }

    pub fn derivative(&self) -> Self {
        TimeSeries { grid: self.grid, values: derivative(&self.values, self.grid.dt()) }
    }

    pub(crate) fn with_values(grid: TimeGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        TimeSeries { grid, values }
    }
}

/// Trapezoidal `int_0^T a b dt`.
pub fn inner_product(a: &TimeSeries, b: &TimeSeries) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch("inner product operands"));
    }
    Ok(trapezoid_dot(a.values(), b.values(), a.grid.dt()))
}

pub(crate) fn trapezoid_dot(a: &[f64], b: &[f64], dt: f64) -> f64 {
    let n = a.len() - 1;
    let interior: f64 = (1..n).map(|k| a[k] * b[k]).sum();
    dt * (interior + 0.5 * (a[0] * b[0] + a[n] * b[n]))
}

/// Second-order derivative stencil, one-sided at both ends.
pub fn derivative(y: &[f64], dt: f64) -> Vec<f64> {
    let n = y.len() - 1;
    let c = 0.5 / dt;
    let mut d = Vec::with_capacity(n + 1);
    d.push(c * (-3.0 * y[0] + 4.0 * y[1] - y[2]));
    for k in 1..n {
        d.push(c * (y[k + 1] - y[k - 1]));
    }
    d.push(c * (3.0 * y[n] - 4.0 * y[n - 1] + y[n - 2]));
    d
}

/// Transpose of [`derivative`] with respect to the Euclidean dot product.
pub fn derivative_transpose(g: &[f64], dt: f64) -> Vec<f64> {
    let n = g.len() - 1;
    let c = 0.5 / dt;
    let mut z = alloc::vec![0.0; n + 1];
    z[0] += -3.0 * c * g[0];
    z[1] += 4.0 * c * g[0];
    z[2] += -c * g[0];
    for k in 1..n {
        z[k + 1] += c * g[k];
        z[k - 1] -= c * g[k];
    }
    z[n] += 3.0 * c * g[n];
    z[n - 1] += -4.0 * c * g[n];
    z[n - 2] += c * g[n];
    z
}

/// `sum_k (a_{k+1}-a_k)(b_{k+1}-b_k)/dt`: the midpoint-rule value of
/// `int_0^T a' b' dt` with cell differences. Used for every squared
/// time-derivative integral so that the quadratic form has no
/// odd-even null space.
pub fn cell_derivative_pairing(a: &[f64], b: &[f64], dt: f64) -> f64 {
    a.windows(2).zip(b.windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[1] - y[0])).sum::<f64>() / dt
}

/// Gradient of `b -> cell_derivative_pairing(a, b, dt)`.
pub fn cell_derivative_gradient(a: &[f64], dt: f64) -> Vec<f64> {
    let n = a.len() - 1;
    let mut z = alloc::vec![0.0; n + 1];
    for k in 0..n {
        let d = (a[k + 1] - a[k]) / dt;
        z[k + 1] += d;
        z[k] -= d;
    }
    z
}
