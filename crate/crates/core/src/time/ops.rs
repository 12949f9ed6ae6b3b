//! The operator family `M, M*, G, G*, H, H*` and the compositions
//! `G*(H(.))`, `H(G*(.))`.
//!
//! `H` and `H*` are defined by non-local ODEs. Instead of iterating on
//! those, `A = G*(H(phi))` is obtained from the coercive two-point problem
//! `-A'' + Bn mu A = phi`, `A(T) = 0`, `-A'(0) + mu A(0) = 0`, and then
//! `H(phi) = -A' + mu A`. The mirrored problem gives `H(G*(psi))` and
//! `H*(psi) = A' + mu A`.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::str::FromStr;

use super::bvp::{BvpSide, RobinBvp};
use super::relax::ExpWeights;
use super::{derivative, derivative_transpose, TimeGrid, TimeSeries};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Name of a time operator, used when lifting to space-time fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeOpTag {
    M,
    MStar,
    G,
    GStar,
    H,
    HStar,
    /// `G*(H(.))`
    GStarH,
    /// `H(G*(.))`
    HGStar,
}

impl TimeOpTag {
    pub const ALL: [TimeOpTag; 8] = [
        TimeOpTag::M,
        TimeOpTag::MStar,
        TimeOpTag::G,
        TimeOpTag::GStar,
        TimeOpTag::H,
        TimeOpTag::HStar,
        TimeOpTag::GStarH,
        TimeOpTag::HGStar,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TimeOpTag::M => "M",
            TimeOpTag::MStar => "M*",
            TimeOpTag::G => "G",
            TimeOpTag::GStar => "G*",
            TimeOpTag::H => "H",
            TimeOpTag::HStar => "H*",
            TimeOpTag::GStarH => "G*H",
            TimeOpTag::HGStar => "HG*",
        }
    }
}

impl FromStr for TimeOpTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TimeOpTag::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::UnknownOperator(s.to_string()))
    }
}

/// Precomputed integrator weights and BVP factorizations for one
/// `(Bn, mu, grid)` triple. Every method maps node values of length
/// `nt + 1` to node values of the same length.
#[derive(Debug, Clone)]
pub struct MemoryOperators {
    grid: TimeGrid,
    mu: f64,
    m_weights: ExpWeights,
    g_weights: ExpWeights,
    gstar_h: RobinBvp,
    h_gstar: RobinBvp,
}

impl MemoryOperators {
    pub fn new(params: &ModelParams, grid: TimeGrid) -> Result<Self> {
        Self::from_rates(params.bn(), params.mu(), grid)
    }

    /// Builds the family from `Bn` and `mu = Bn + 1/N` directly.
    pub fn from_rates(bn: f64, mu: f64, grid: TimeGrid) -> Result<Self> {
        if !(bn > 0.0 && mu > bn && mu.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rates",
                reason: alloc::format!("need 0 < Bn < mu, got Bn = {bn}, mu = {mu}"),
            });
        }
        let dt = grid.dt();
        let kappa = bn * mu;
        Ok(MemoryOperators {
            grid,
            mu,
            m_weights: ExpWeights::new(bn, dt),
            g_weights: ExpWeights::new(mu, dt),
            gstar_h: RobinBvp::new(BvpSide::RobinAtStart, kappa, mu, dt, grid.nt())?,
            h_gstar: RobinBvp::new(BvpSide::RobinAtEnd, kappa, mu, dt, grid.nt())?,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn m(&self, phi: &[f64]) -> Vec<f64> {
        self.m_weights.forward(phi)
    }
    pub fn m_star(&self, psi: &[f64]) -> Vec<f64> {
        self.m_weights.backward(psi)
    }
    pub fn g(&self, phi: &[f64]) -> Vec<f64> {
        self.g_weights.forward(phi)
    }
    pub fn g_star(&self, psi: &[f64]) -> Vec<f64> {
        self.g_weights.backward(psi)
    }

    /// `G*(H(phi))`.
    pub fn gstar_h(&self, phi: &[f64]) -> Vec<f64> {
        self.gstar_h.solve(phi)
    }

    /// `H(G*(psi))`, equal to `G(H*(psi))`.
    pub fn h_gstar(&self, psi: &[f64]) -> Vec<f64> {
        self.h_gstar.solve(psi)
    }

    pub fn h(&self, phi: &[f64]) -> Vec<f64> {
        let a = self.gstar_h.solve(phi);
        let d = derivative(&a, self.grid.dt());
        a.iter().zip(&d).map(|(a, d)| self.mu * a - d).collect()
    }

    pub fn h_star(&self, psi: &[f64]) -> Vec<f64> {
        let a = self.h_gstar.solve(psi);
        let d = derivative(&a, self.grid.dt());
        a.iter().zip(&d).map(|(a, d)| self.mu * a + d).collect()
    }

    pub fn apply(&self, tag: TimeOpTag, x: &[f64]) -> Vec<f64> {
        match tag {
            TimeOpTag::M => self.m(x),
            TimeOpTag::MStar => self.m_star(x),
            TimeOpTag::G => self.g(x),
            TimeOpTag::GStar => self.g_star(x),
            TimeOpTag::H => self.h(x),
            TimeOpTag::HStar => self.h_star(x),
            TimeOpTag::GStarH => self.gstar_h(x),
            TimeOpTag::HGStar => self.h_gstar(x),
        }
    }

    // Euclidean transposes of the discrete maps, used by the discrete
    // gradient of the cost functional.

    pub fn m_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.m_weights.forward_transpose(y)
    }

    pub fn gstar_h_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.gstar_h.solve_transpose(y)
    }

    pub fn h_transpose(&self, y: &[f64]) -> Vec<f64> {
        let d = derivative_transpose(y, self.grid.dt());
        let z: Vec<f64> = y.iter().zip(&d).map(|(y, d)| self.mu * y - d).collect();
        self.gstar_h.solve_transpose(&z)
    }
}

fn series_op(x: &TimeSeries, params: &ModelParams, tag: TimeOpTag) -> Result<TimeSeries> {
    let ops = MemoryOperators::new(params, *x.grid())?;
    Ok(TimeSeries::with_values(*x.grid(), ops.apply(tag, x.values())))
}

/// `G*(H(phi))` from the two-point problem with a Robin end at `t = 0`.
pub fn bvp_gstar_h(phi: &TimeSeries, params: &ModelParams) -> Result<TimeSeries> {
    series_op(phi, params, TimeOpTag::GStarH)
}

/// `H(G*(psi))` from the two-point problem with a Robin end at `t = T`.
pub fn bvp_h_gstar(psi: &TimeSeries, params: &ModelParams) -> Result<TimeSeries> {
    series_op(psi, params, TimeOpTag::HGStar)
}

pub fn apply_h(phi: &TimeSeries, params: &ModelParams) -> Result<TimeSeries> {
    series_op(phi, params, TimeOpTag::H)
}

pub fn apply_hstar(psi: &TimeSeries, params: &ModelParams) -> Result<TimeSeries> {
    series_op(psi, params, TimeOpTag::HStar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math;
    use alloc::vec;

    fn ops(nt: usize) -> MemoryOperators {
        MemoryOperators::from_rates(1.0, 2.0, TimeGrid::new(1.0, nt).unwrap()).unwrap()
    }

    #[test]
    fn tags_round_trip() {
        for t in TimeOpTag::ALL {
            assert_eq!(t.as_str().parse::<TimeOpTag>().unwrap(), t);
        }
        assert!(matches!("Q".parse::<TimeOpTag>(), Err(Error::UnknownOperator(_))));
    }

    #[test]
    fn zero_in_zero_out() {
        let o = ops(16);
        let z = vec![0.0; 17];
        for t in TimeOpTag::ALL {
            assert!(o.apply(t, &z).iter().all(|&v| v == 0.0), "{t:?}");
        }
    }

    #[test]
    fn h_initial_and_hstar_terminal_conditions() {
        let o = ops(64);
        let x: Vec<f64> = (0..=64).map(|k| libm::sin(0.37 * k as f64) + 0.2).collect();
        assert!(o.h(&x)[0].abs() < 1e-10);
        assert!(o.h_star(&x)[64].abs() < 1e-10);
        let one = vec![1.0; 65];
        assert!(o.h(&one)[0].abs() < 1e-10);
    }

    #[test]
    fn hstar_is_mirror_of_h() {
        let o = ops(50);
        let x: Vec<f64> = (0..=50).map(|k| libm::cos(0.21 * k as f64) * k as f64).collect();
        let mut r = x.clone();
        r.reverse();
        let mut hr = o.h(&r);
        hr.reverse();
        let hs = o.h_star(&x);
        for (a, b) in hr.iter().zip(&hs) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn transposes() {
        let o = ops(20);
        let a: Vec<f64> = (0..=20).map(|k| libm::sin(0.5 * k as f64)).collect();
        let b: Vec<f64> = (0..=20).map(|k| libm::cos(0.8 * k as f64 - 0.1)).collect();
        let pairs: [(Vec<f64>, Vec<f64>); 3] = [
            (o.m(&a), o.m_transpose(&b)),
            (o.h(&a), o.h_transpose(&b)),
            (o.gstar_h(&a), o.gstar_h_transpose(&b)),
        ];
        for (fa, tb) in pairs.iter() {
            let lhs = math::dot(fa, &b);
            let rhs = math::dot(&a, tb);
            assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn rejects_inconsistent_rates() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        assert!(MemoryOperators::from_rates(1.0, 0.5, g).is_err());
    }
}
