//! The limit cost functional
//!
//! ```text
//! J0(v) = ||∇u||² + ||u(T)||² + AnBn/N ∫_ω (∂t G*H(u))² + AnBn ∫_c M(u)(T)²
//!       + An ∫_c (u - Bn M(u))² + AnBn ∫_ω H(u)(T)² + An ∫_ω (u - Bn H(u))²
//!       + N AnBn ∫_ω (∂t v)² + N AnBn mu ∫_ω v(T)² + N AnBn² mu ∫_ω v²
//! ```
//!
//! with `u = u0(v)`, its derivative and the quadratic identities behind
//! `J0(v0) = ∫ f p0`.
//!
//! Time integrals use the trapezoidal rule, except squared time
//! derivatives, which use cell differences with the midpoint rule.
//! Spatial gradients use edge differences, which makes
//! `||∇u||² = -(u, Δu)` hold exactly on the grid.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Result;
use crate::model::Model;
use crate::optimality::OptimalityResult;
use crate::space::{Region, SpaceTimeField};
use crate::state::{solve_linearized, solve_state_transpose, Engine, SolveReport, SolverOptions};
use crate::time::{cell_derivative_gradient, cell_derivative_pairing, trapezoid_dot};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub grad_term: f64,
    pub terminal_term: f64,
    pub dtgh_term: f64,
    pub m_terminal_term: f64,
    pub m_bulk_term: f64,
    pub h_terminal_term: f64,
    pub h_bulk_term: f64,
    pub dv_term: f64,
    pub v_terminal_term: f64,
    pub v_bulk_term: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub const NAMES: [&'static str; 10] = [
        "grad_term",
        "terminal_term",
        "dtGH_term",
        "M_terminal_term",
        "M_bulk_term",
        "H_terminal_term",
        "H_bulk_term",
        "dv_term",
        "v_terminal_term",
        "v_bulk_term",
    ];

    pub fn terms(&self) -> [f64; 10] {
        [
            self.grad_term,
            self.terminal_term,
            self.dtgh_term,
            self.m_terminal_term,
            self.m_bulk_term,
            self.h_terminal_term,
            self.h_bulk_term,
            self.dv_term,
            self.v_terminal_term,
            self.v_bulk_term,
        ]
    }

    pub fn named_terms(&self) -> impl Iterator<Item = (&'static str, f64)> {
        Self::NAMES.into_iter().zip(self.terms())
    }

    fn with_total(mut self) -> Self {
        self.total = self.terms().iter().sum();
        self
    }
}

struct Coefs {
    an: f64,
    bn: f64,
    anbn: f64,
    n: f64,
    mu: f64,
}

fn coefs(model: &Model) -> Coefs {
    let p = model.params();
    Coefs { an: p.an(), bn: p.bn(), anbn: p.an() * p.bn(), n: p.control_cost(), mu: p.mu() }
}

/// Per-term bilinear forms of the state part, evaluated on `(a, b)`.
fn state_terms(model: &Model, a: &SpaceTimeField, b: &SpaceTimeField) -> [f64; 7] {
    let c = coefs(model);
    let ops = model.ops();
    let grid = model.grid();
    let tg = model.tgrid();
    let dt = tg.dt();
    let nt = tg.nt();
    let wt = tg.weights();
    let wx = grid.quadrature_weights();

    let mut grad = 0.0;
    for k in 0..=nt {
        grad += wt[k] * grid.gradient_pairing(&a.slice_at(k), &b.slice_at(k));
    }
    let mut t = [grad, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    for &p in model.interior() {
        let (sa, sb) = (a.series(p), b.series(p));
        let w = wx[p];
        t[1] += w * sa[nt] * sb[nt];
        if model.mask().contains(p) {
            let (ga, gb) = (ops.gstar_h(sa), ops.gstar_h(sb));
            t[2] += w * c.anbn / c.n * cell_derivative_pairing(&ga, &gb, dt);
            let (ha, hb) = (ops.h(sa), ops.h(sb));
            t[5] += w * c.anbn * ha[nt] * hb[nt];
            let ra: Vec<f64> = sa.iter().zip(&ha).map(|(u, h)| u - c.bn * h).collect();
            let rb: Vec<f64> = sb.iter().zip(&hb).map(|(u, h)| u - c.bn * h).collect();
            t[6] += w * c.an * trapezoid_dot(&ra, &rb, dt);
        } else {
            let (ma, mb) = (ops.m(sa), ops.m(sb));
            t[3] += w * c.anbn * ma[nt] * mb[nt];
            let ra: Vec<f64> = sa.iter().zip(&ma).map(|(u, m)| u - c.bn * m).collect();
            let rb: Vec<f64> = sb.iter().zip(&mb).map(|(u, m)| u - c.bn * m).collect();
            t[4] += w * c.an * trapezoid_dot(&ra, &rb, dt);
        }
    }
    t
}

fn control_terms(model: &Model, a: &SpaceTimeField, b: &SpaceTimeField) -> [f64; 3] {
    let c = coefs(model);
    let tg = model.tgrid();
    let (dt, nt) = (tg.dt(), tg.nt());
    let wx = model.grid().quadrature_weights();
    let k = c.n * c.anbn;
    let mut t = [0.0; 3];
    for p in model.mask().nodes() {
        let (sa, sb) = (a.series(p), b.series(p));
        t[0] += wx[p] * k * cell_derivative_pairing(sa, sb, dt);
        t[1] += wx[p] * k * c.mu * sa[nt] * sb[nt];
        t[2] += wx[p] * k * c.bn * c.mu * trapezoid_dot(sa, sb, dt);
    }
    t
}

/// Evaluates every term of `J0` for the pair `(v, u0)`.
pub fn evaluate_j0(model: &Model, v: &SpaceTimeField, u0: &SpaceTimeField) -> Result<CostBreakdown> {
    model.check_layout(v)?;
    model.check_layout(u0)?;
    let s = state_terms(model, u0, u0);
    let r = control_terms(model, v, v);
    Ok(CostBreakdown {
        grad_term: s[0],
        terminal_term: s[1],
        dtgh_term: s[2],
        m_terminal_term: s[3],
        m_bulk_term: s[4],
        h_terminal_term: s[5],
        h_bulk_term: s[6],
        dv_term: r[0],
        v_terminal_term: r[1],
        v_bulk_term: r[2],
        total: 0.0,
    }
    .with_total())
}

/// Symmetric bilinear form whose diagonal is the state part of `J0`.
pub fn state_pairing(model: &Model, a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    model.check_layout(a)?;
    model.check_layout(b)?;
    Ok(state_terms(model, a, b).iter().sum())
}

/// Symmetric bilinear form whose diagonal is the control part of `J0`.
pub fn control_pairing(model: &Model, a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    model.check_layout(a)?;
    model.check_layout(b)?;
    Ok(control_terms(model, a, b).iter().sum())
}

/// Directional derivative `J0'(v0) v` of the implemented functional,
/// through the linearized state `θ = u0'(v0) v`.
pub fn gradient_j0(
    model: &Model,
    v0: &SpaceTimeField,
    u0_of_v0: &SpaceTimeField,
    direction: &SpaceTimeField,
    options: SolverOptions,
) -> Result<f64> {
    let (theta, _) = solve_linearized(model, direction, options)?;
    Ok(2.0 * state_pairing(model, u0_of_v0, &theta)? + 2.0 * control_pairing(model, v0, direction)?)
}

/// Euclidean gradient of the state part of `J0` with respect to the node
/// values of `u` (interior nodes, all levels).
pub fn state_gradient(model: &Model, u: &SpaceTimeField) -> Result<SpaceTimeField> {
    model.check_layout(u)?;
    let c = coefs(model);
    let ops = model.ops();
    let grid = model.grid();
    let tg = model.tgrid();
    let (dt, nt) = (tg.dt(), tg.nt());
    let wt = tg.weights();
    let wx = grid.quadrature_weights();
    let vol = grid.cell_volume();
    let mut g = model.zeros();
    for k in 0..=nt {
        let lap = grid.laplacian(&u.slice_at(k));
        for &p in model.interior() {
            g.set(p, k, -2.0 * wt[k] * vol * lap[p]);
        }
    }
    for &p in model.interior() {
        let s = u.series(p);
        let w = wx[p];
        let mut acc = vec![0.0; nt + 1];
        acc[nt] += 2.0 * w * s[nt];
        if model.mask().contains(p) {
            let ga = ops.gstar_h(s);
            let z: Vec<f64> = cell_derivative_gradient(&ga, dt).iter().map(|z| 2.0 * w * c.anbn / c.n * z).collect();
            add(&mut acc, &ops.gstar_h_transpose(&z));
            let h = ops.h(s);
            let mut e = vec![0.0; nt + 1];
            e[nt] = 2.0 * w * c.anbn * h[nt];
            let r: Vec<f64> = (0..=nt).map(|k| 2.0 * w * c.an * wt[k] * (s[k] - c.bn * h[k])).collect();
            add(&mut acc, &r);
            let back: Vec<f64> = e.iter().zip(&r).map(|(e, r)| e - c.bn * r).collect();
            add(&mut acc, &ops.h_transpose(&back));
        } else {
            let m = ops.m(s);
            let mut e = vec![0.0; nt + 1];
            e[nt] = 2.0 * w * c.anbn * m[nt];
            let r: Vec<f64> = (0..=nt).map(|k| 2.0 * w * c.an * wt[k] * (s[k] - c.bn * m[k])).collect();
            add(&mut acc, &r);
            let back: Vec<f64> = e.iter().zip(&r).map(|(e, r)| e - c.bn * r).collect();
            add(&mut acc, &ops.m_transpose(&back));
        }
        add(g.series_mut(p), &acc);
    }
    Ok(g)
}

/// Euclidean gradient of the control part of `J0` with respect to the
/// node values of `v`.
pub fn control_gradient(model: &Model, v: &SpaceTimeField) -> Result<SpaceTimeField> {
    model.check_layout(v)?;
    let c = coefs(model);
    let tg = model.tgrid();
    let (dt, nt) = (tg.dt(), tg.nt());
    let wt = tg.weights();
    let wx = model.grid().quadrature_weights();
    let k = 2.0 * c.n * c.anbn;
    let mut g = model.zeros();
    for p in model.mask().nodes() {
        let s = v.series(p);
        let z = cell_derivative_gradient(s, dt);
        let out = g.series_mut(p);
        for j in 0..=nt {
            out[j] = wx[p] * k * (z[j] + c.bn * c.mu * wt[j] * s[j]);
        }
        out[nt] += wx[p] * k * c.mu * s[nt];
    }
    Ok(g)
}

/// Full Euclidean gradient of `v -> J0(v, u0(v))` over the admissible
/// coordinates (control nodes, levels `1..=nt`; everything else is zero).
/// `u0` must be the state of `v`.
pub fn gradient_vector(
    model: &Model,
    v: &SpaceTimeField,
    u0: &SpaceTimeField,
    options: SolverOptions,
) -> Result<(SpaceTimeField, SolveReport)> {
    // The adjoint variables scale like dt * volume; solve in natural units.
    let scale = model.tgrid().dt() * model.grid().cell_volume();
    let gu = state_gradient(model, u0)?.scaled(1.0 / scale);
    let (y, rep) = solve_state_transpose(model, &gu, options)?;
    let engine = Engine::new(model, options);
    let sy = model.scatter(&engine.source_transpose(&model.gather(&y)));
    let anbn = model.params().an() * model.params().bn();
    let mut g = control_gradient(model, v)?;
    for p in model.mask().nodes() {
        let src = sy.series(p);
        let out = g.series_mut(p);
        for k in 0..out.len() {
            out[k] += scale * anbn * src[k];
        }
        out[0] = 0.0;
    }
    Ok((g, rep))
}

fn add(acc: &mut [f64], x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
}

/// `(J0(v0, u0), ∫ f p0)` for a solved optimality system.
pub fn check_fp_identity(model: &Model, f: &SpaceTimeField, result: &OptimalityResult) -> Result<(f64, f64)> {
    let lhs = evaluate_j0(model, &result.v0, &result.u0)?.total;
    let rhs = f.inner(&result.p0, model.mask(), Region::All)?;
    Ok((lhs, rhs))
}

/// `(∫_c (u - Bn² M*(M(u))) u,  ∫_c (u - Bn M(u))² + Bn ∫_c M(u)(T)²)`.
pub fn check_m_decomposition(model: &Model, u: &SpaceTimeField) -> Result<(f64, f64)> {
    model.check_layout(u)?;
    let c = coefs(model);
    let ops = model.ops();
    let tg = model.tgrid();
    let (dt, nt) = (tg.dt(), tg.nt());
    let wx = model.grid().quadrature_weights();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for p in model.interior().iter().copied().filter(|&p| !model.mask().contains(p)) {
        let s = u.series(p);
        let m = ops.m(s);
        let mm = ops.m_star(&m);
        let a: Vec<f64> = s.iter().zip(&mm).map(|(u, y)| u - c.bn * c.bn * y).collect();
        lhs += wx[p] * trapezoid_dot(&a, s, dt);
        let r: Vec<f64> = s.iter().zip(&m).map(|(u, m)| u - c.bn * m).collect();
        rhs += wx[p] * (trapezoid_dot(&r, &r, dt) + c.bn * m[nt] * m[nt]);
    }
    Ok((lhs, rhs))
}

/// `(∫_ω (u - Bn mu G*(H(u))) u,
///   ∫_ω (u - Bn H(u))² + Bn/N ∫_ω (∂t G*(H(u)))² + Bn ∫_ω H(u)(T)²)`.
pub fn check_gh_decomposition(model: &Model, u: &SpaceTimeField) -> Result<(f64, f64)> {
    model.check_layout(u)?;
    let c = coefs(model);
    let ops = model.ops();
    let tg = model.tgrid();
    let (dt, nt) = (tg.dt(), tg.nt());
    let wx = model.grid().quadrature_weights();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for p in model.mask().nodes() {
        let s = u.series(p);
        let gh = ops.gstar_h(s);
        let h = ops.h(s);
        let a: Vec<f64> = s.iter().zip(&gh).map(|(u, g)| u - c.bn * c.mu * g).collect();
        lhs += wx[p] * trapezoid_dot(&a, s, dt);
        let r: Vec<f64> = s.iter().zip(&h).map(|(u, h)| u - c.bn * h).collect();
        rhs += wx[p]
            * (trapezoid_dot(&r, &r, dt) + c.bn / c.n * cell_derivative_pairing(&gh, &gh, dt) + c.bn * h[nt] * h[nt]);
    }
    Ok((lhs, rhs))
}

/// `(∫_ω H(G*(p)) p,  ∫_ω (∂t H(G*(p)))² + Bn mu ∫_ω H(G*(p))² + mu ∫_ω H(G*(p))(T)²)`.
pub fn check_hgstar_decomposition(model: &Model, p: &SpaceTimeField) -> Result<(f64, f64)> {
    model.check_layout(p)?;
    let c = coefs(model);
    let ops = model.ops();
    let tg = model.tgrid();
    let (dt, nt) = (tg.dt(), tg.nt());
    let wx = model.grid().quadrature_weights();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for q in model.mask().nodes() {
        let s = p.series(q);
        let a = ops.h_gstar(s);
        lhs += wx[q] * trapezoid_dot(&a, s, dt);
        rhs += wx[q]
            * (cell_derivative_pairing(&a, &a, dt) + c.bn * c.mu * trapezoid_dot(&a, &a, dt) + c.mu * a[nt] * a[nt]);
    }
    Ok((lhs, rhs))
}
