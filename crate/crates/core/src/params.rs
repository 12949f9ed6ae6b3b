//! Model constants and geometry.
//!
//! `Bn = (n-2)/C0` is the relaxation rate of the uncontrolled particles and
//! `mu = Bn + 1/N` the rate of the controlled ones. `An` is the harmonic
//! capacity density of the critically scaled balls,
//! `An = (n-2) * |S^{n-1}| * C0^{n-2}`, which [`cell_capacity_oracle`]
//! confirms from the radial cell problem.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Axis-aligned box in up to three dimensions. Unused axes are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl BoxRegion {
    pub fn new(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.is_empty() || lo.len() > 3 || lo.len() != hi.len() {
            return Err(Error::InvalidParameter {
                name: "box",
                reason: format!("expected 1..=3 matching bounds, got {} and {}", lo.len(), hi.len()),
            });
        }
        let mut b = BoxRegion { lo: [0.0; 3], hi: [1.0; 3] };
        for (axis, (&l, &h)) in lo.iter().zip(hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(Error::InvalidParameter {
                    name: "box",
                    reason: format!("axis {axis}: need lo < hi, got [{l}, {h}]"),
                });
            }
            b.lo[axis] = l;
            b.hi[axis] = h;
        }
        Ok(b)
    }

    /// Unit cube `(0,1)^dim`.
    pub fn unit() -> Self {
        BoxRegion { lo: [0.0; 3], hi: [1.0; 3] }
    }

    pub fn measure(&self, dim: usize) -> f64 {
        (0..dim).map(|a| self.hi[a] - self.lo[a]).product()
    }

    /// Closed-box membership with a small absolute slack so that nodes
    /// sitting exactly on a face are classified consistently under refinement.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(a, &xa)| {
            let slack = 1e-12 * (self.hi[a] - self.lo[a]);
            xa >= self.lo[a] - slack && xa <= self.hi[a] + slack
        })
    }

    /// `true` if the closure of `self` lies in the open interior of `outer`.
    pub fn strictly_inside(&self, outer: &BoxRegion, dim: usize) -> bool {
        (0..dim).all(|a| self.lo[a] > outer.lo[a] && self.hi[a] < outer.hi[a])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    n: u32,
    c0: f64,
    control_cost: f64,
    horizon: f64,
    bn: f64,
    an: f64,
    mu: f64,
    sim_dim: usize,
    domain: BoxRegion,
    omega: BoxRegion,
}

/// Builds validated model parameters.
///
/// `n` is the analysis dimension fixing the critical exponent `n/(n-2)`;
/// `sim_dim` is the dimension of the discretized limit problem and is
/// independent of `n`.
pub fn make_params(
    n: u32,
    c0: f64,
    control_cost: f64,
    horizon: f64,
    sim_dim: usize,
    domain: BoxRegion,
    omega: BoxRegion,
) -> Result<ModelParams> {
    if n < 3 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: format!("critical exponent n/(n-2) needs n >= 3, got {n}"),
        });
    }
    positive("C0", c0)?;
    positive("N", control_cost)?;
    positive("T", horizon)?;
    if !(1..=3).contains(&sim_dim) {
        return Err(Error::InvalidParameter {
            name: "sim_dim",
            reason: format!("must be 1, 2 or 3, got {sim_dim}"),
        });
    }
    if !omega.strictly_inside(&domain, sim_dim) {
        return Err(Error::InvalidParameter {
            name: "omega",
            reason: "closure of omega must lie strictly inside the domain".to_string(),
        });
    }
    let bn = (n - 2) as f64 / c0;
    let an = capacity_constant(n, c0);
    let oracle = capacity_extrapolation(n, c0)?;
    if math::abs(oracle - an) > 1e-2 * an {
        return Err(Error::CapacityMismatch { formula: an, oracle });
    }
    Ok(ModelParams {
        n,
        c0,
        control_cost,
        horizon,
        bn,
        an,
        mu: bn + 1.0 / control_cost,
        sim_dim,
        domain,
        omega,
    })
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be positive and finite, got {value}") })
    }
}

impl ModelParams {
    pub fn n(&self) -> u32 {
        self.n
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    /// Control cost weight `N`.
    pub fn control_cost(&self) -> f64 {
        self.control_cost
    }
    /// Time horizon `T`.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn bn(&self) -> f64 {
        self.bn
    }
    pub fn an(&self) -> f64 {
        self.an
    }
    /// `Bn + 1/N`.
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sim_dim(&self) -> usize {
        self.sim_dim
    }
    pub fn domain(&self) -> &BoxRegion {
        &self.domain
    }
    pub fn omega(&self) -> &BoxRegion {
        &self.omega
    }

    /// Replaces `An` with an arbitrary value, bypassing the capacity check.
    /// Used for sensitivity studies and mutation testing of the verify suite.
    pub fn with_an_override(mut self, an: f64) -> Self {
        self.an = an;
        self
    }

    /// Same parameters with a different control region.
    pub fn with_omega(&self, omega: BoxRegion) -> Result<Self> {
        if !omega.strictly_inside(&self.domain, self.sim_dim) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: "closure of omega must lie strictly inside the domain".to_string(),
            });
        }
        let mut p = self.clone();
        p.omega = omega;
        Ok(p)
    }
}

/// `Gamma(n/2)` by the half-integer recursion.
pub fn gamma_half(n: u32) -> f64 {
    let (mut x, mut g) = if n % 2 == 0 { (1.0, 1.0) } else { (0.5, math::sqrt(math::PI)) };
    let target = n as f64 / 2.0;
    while x < target - 0.25 {
        g *= x;
        x += 1.0;
    }
    g
}

/// Surface area of the unit sphere in `R^n`, `2 pi^{n/2} / Gamma(n/2)`.
pub fn unit_sphere_area(n: u32) -> f64 {
    2.0 * math::powf(math::PI, n as f64 / 2.0) / gamma_half(n)
}

/// Closed-form strange-term density `An = (n-2) |S^{n-1}| C0^{n-2}`.
pub fn capacity_constant(n: u32, c0: f64) -> f64 {
    (n - 2) as f64 * unit_sphere_area(n) * math::powi(c0, n as i32 - 2)
}

/// Cell-problem capacity density for each `eps`.
///
/// For each `eps` the radial harmonic function `w` with `w = 1` on the
/// particle of radius `a = C0 eps^{n/(n-2)}` and `w = 0` on `r = eps/4` is
/// known in closed form; its Dirichlet energy is integrated numerically over
/// the annulus and scaled by the particle density `eps^{-n}`.
pub fn cell_capacity_oracle(n: u32, c0: f64, eps_list: &[f64]) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidParameter { name: "n", reason: format!("need n >= 3, got {n}") });
    }
    positive("C0", c0)?;
    eps_list.iter().map(|&eps| cell_energy_density(n, c0, eps)).collect()
}

fn cell_energy_density(n: u32, c0: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter { name: "eps", reason: format!("must lie in (0,1), got {eps}") });
    }
    let nf = n as f64;
    let a = c0 * math::powf(eps, nf / (nf - 2.0));
    let r_out = eps / 4.0;
    if a >= r_out {
        return Err(Error::AnnulusCollapsed { eps });
    }
    let p = 2.0 - nf;
    let denom = math::powf(a, p) - math::powf(r_out, p);
    // w'(r) = p r^{p-1} / denom; energy = |S| int_a^R w'^2 r^{n-1} dr.
    // In s = ln r the integrand is w'(r)^2 r^n, smooth in s.
    let integrand = |s: f64| {
        let r = math::exp(s);
        let dw = p * math::powf(r, p - 1.0) / denom;
        dw * dw * math::powf(r, nf)
    };
    let energy = unit_sphere_area(n) * gauss_legendre(integrand, math::ln(a), math::ln(r_out), 64);
    Ok(energy * math::powf(eps, -nf))
}

/// Composite 5-point Gauss-Legendre rule on `panels` equal panels.
fn gauss_legendre<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, panels: usize) -> f64 {
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let width = (hi - lo) / panels as f64;
    let mut total = 0.0;
    for i in 0..panels {
        let mid = lo + (i as f64 + 0.5) * width;
        let half = 0.5 * width;
        for (x, w) in NODES.iter().zip(WEIGHTS.iter()) {
            total += w * half * f(mid + half * x);
        }
    }
    total
}

/// Richardson extrapolation `eps -> 0` of the cell oracle.
///
/// The oracle sequence has an expansion in powers of `eps^2`, so a
/// three-level table in `eps^2` with halving ratio is used.
pub fn capacity_extrapolation(n: u32, c0: f64) -> Result<f64> {
    let nf = n as f64;
    let mut eps = 0.05;
    // shrink the starting radius until the annulus is comfortably non-empty
    while c0 * math::powf(eps, nf / (nf - 2.0)) >= eps / 16.0 {
        eps *= 0.5;
        if eps < 1e-12 {
            return Err(Error::AnnulusCollapsed { eps });
        }
    }
    let vals = cell_capacity_oracle(n, c0, &[eps, eps / 2.0, eps / 4.0])?;
    let r1 = [(4.0 * vals[1] - vals[0]) / 3.0, (4.0 * vals[2] - vals[1]) / 3.0];
    Ok((16.0 * r1[1] - r1[0]) / 15.0)
}
