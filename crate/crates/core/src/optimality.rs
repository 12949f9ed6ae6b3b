//! The coupled optimality system
//!
//! ```text
//! u' - Δu + An (u - Bn H(u)) χ_ω + An (u - Bn M(u)) χ_c = f - N⁻¹ An Bn H(G*(p)) χ_ω,   u(0) = 0
//! -p' - Δp + An (p - Bn H*(p)) χ_ω + An (p - Bn M*(p)) χ_c
//!     = -Δu + An (u - Bn mu G*(H(u))) χ_ω + An (u - Bn² M*(M(u))) χ_c,           p(T) = u(T)
//! ```
//!
//! with optimal control `v0 = -N⁻¹ H(G*(p)) χ_ω`, plus a direct minimizer
//! of `J0` used as an independent route to the same control.

use alloc::vec;
use alloc::vec::Vec;

use crate::cost::{control_pairing, evaluate_j0, gradient_vector, state_pairing};
use crate::error::{Error, Result};
use crate::math;
use crate::model::Model;
use crate::space::{Region, SpaceTimeField};
use crate::state::{
    check_admissible, residual_backward, residual_state, solve_backward, solve_linearized, solve_state, SolveReport,
    SolverOptions, StateProblem,
};
use crate::tridiag::{Factored, Tridiagonal};

/// Right side of the adjoint equation for the state `u0`.
pub fn adjoint_source(model: &Model, u0: &SpaceTimeField) -> Result<SpaceTimeField> {
    model.check_layout(u0)?;
    let p = model.params();
    let (an, bn, mu) = (p.an(), p.bn(), p.mu());
    let ops = model.ops();
    let grid = model.grid();
    let nt = model.tgrid().nt();
    let mut src = model.zeros();
    for k in 0..=nt {
        let lap = grid.laplacian(&u0.slice_at(k));
        for &q in model.interior() {
            src.set(q, k, -lap[q]);
        }
    }
    for &q in model.interior() {
        let s = u0.series(q);
        let mem = if model.mask().contains(q) {
            ops.gstar_h(s).iter().map(|g| bn * mu * g).collect::<Vec<_>>()
        } else {
            ops.m_star(&ops.m(s)).iter().map(|g| bn * bn * g).collect()
        };
        let out = src.series_mut(q);
        for k in 0..=nt {
            out[k] += an * (s[k] - mem[k]);
        }
    }
    Ok(src)
}

/// Solves the adjoint equation for the state `u0`, with `p(T) = u0(T)`.
pub fn solve_adjoint(model: &Model, u0: &SpaceTimeField, options: SolverOptions) -> Result<(SpaceTimeField, SolveReport)> {
    let src = adjoint_source(model, u0)?;
    let nt = model.tgrid().nt();
    solve_backward(model, &src, &u0.slice_at(nt), options)
}

/// `-N⁻¹ H(G*(p)) χ_ω`, lifted node by node.
pub fn control_from_adjoint(model: &Model, p0: &SpaceTimeField) -> Result<SpaceTimeField> {
    model.check_layout(p0)?;
    let c = -1.0 / model.params().control_cost();
    let mut v = model.zeros();
    for q in model.mask().nodes() {
        let a = model.ops().h_gstar(p0.series(q));
        v.series_mut(q).iter_mut().zip(&a).for_each(|(v, a)| *v = c * a);
    }
    Ok(v)
}

/// Recovers the control from `p0` by solving, per control node,
/// `-v'' + Bn mu v = -N⁻¹ p0` with `v(0) = 0` and `v'(T) + mu v(T) = 0`.
pub fn extract_control_ode(model: &Model, p0: &SpaceTimeField) -> Result<SpaceTimeField> {
    model.check_layout(p0)?;
    let prm = model.params();
    let (kappa, mu, n) = (prm.bn() * prm.mu(), prm.mu(), prm.control_cost());
    let tg = model.tgrid();
    let (h, nt) = (tg.dt(), tg.nt());
    // Unknowns v_1..v_nt. The one-sided second-order approximation of
    // v'(T) is closed with the last interior row to eliminate v_{nt-2}.
    let mut a = Tridiagonal::zeros(nt);
    for j in 0..nt {
        a.diag[j] = 2.0 / (h * h) + kappa;
        a.sub[j] = -1.0 / (h * h);
        a.sup[j] = -1.0 / (h * h);
    }
    a.diag[nt - 1] = (2.0 + 2.0 * h * mu) / (h * h);
    a.sub[nt - 1] = (-2.0 + h * h * kappa) / (h * h);
    let lu = a.factor()?;
    let mut v = model.zeros();
    for q in model.mask().nodes() {
        let p = p0.series(q);
        let mut rhs: Vec<f64> = (1..=nt).map(|k| -p[k] / n).collect();
        rhs[nt - 1] = -p[nt - 1] / n;
        lu.solve_in_place(&mut rhs);
        v.series_mut(q)[1..].copy_from_slice(&rhs);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityOptions {
    /// Bound on the summed state and adjoint residuals.
    pub outer_tol: f64,
    pub outer_max: usize,
    pub relaxation: f64,
    pub relaxation_min: f64,
    pub inner: SolverOptions,
}

impl Default for OptimalityOptions {
    fn default() -> Self {
        OptimalityOptions {
            outer_tol: 1e-7,
            outer_max: 100,
            relaxation: 1.0,
            relaxation_min: 1.0 / 64.0,
            inner: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimalityResult {
    pub u0: SpaceTimeField,
    pub p0: SpaceTimeField,
    pub v0: SpaceTimeField,
    pub state_reports: Vec<SolveReport>,
    pub adjoint_reports: Vec<SolveReport>,
    pub outer_iterations: usize,
    pub outer_residual: f64,
    pub residual_history: Vec<f64>,
    pub relaxation: f64,
    pub converged: bool,
}

/// Block Gauss–Seidel on the optimality system: state from the current
/// control, adjoint from the state, new control from the adjoint, with
/// under-relaxation of the control update that halves whenever the
/// combined residual grows.
///
/// On return `p0(T) = u0(T)` and `v0 = -N⁻¹ H(G*(p0)) χ_ω` hold exactly;
/// `outer_residual` is the state residual of `u0` against `v0` plus the
/// adjoint residual of `p0`.
pub fn solve_optimality(model: &Model, f: &SpaceTimeField, options: OptimalityOptions) -> Result<OptimalityResult> {
    model.check_layout(f)?;
    if !(options.outer_tol > 0.0) || options.outer_max == 0 {
        return Err(Error::InvalidParameter { name: "outer_tol", reason: "need outer_tol > 0 and outer_max >= 1".into() });
    }
    let opts = options.inner;
    let nt = model.tgrid().nt();
    let mut v = model.zeros();
    let mut rho = options.relaxation;
    let mut state_reports = Vec::new();
    let mut adjoint_reports = Vec::new();
    let mut history = Vec::new();
    let mut best: Option<(f64, SpaceTimeField, SpaceTimeField, SpaceTimeField)> = None;
    let (u, rep) = solve_state(&StateProblem::new(model, f, &v, opts)?)?;
    state_reports.push(rep);
    let mut u = u;
    let mut last_gain = 0;
    let mut iterations = 0;
    for it in 1..=options.outer_max {
        iterations = it;
        let (p, arep) = solve_adjoint(model, &u, opts)?;
        adjoint_reports.push(arep);
        let v_new = control_from_adjoint(model, &p)?;
        let src = adjoint_source(model, &u)?;
        let r_adj = residual_backward(&p, model, &src, &u.slice_at(nt), opts)?;
        let r_state = residual_state(&u, &StateProblem::new(model, f, &v_new, opts)?)?;
        let res = r_state + r_adj;
        if let Some(&prev) = history.last() {
            if res > prev {
                rho = (0.5 * rho).max(options.relaxation_min);
            }
        }
        history.push(res);
        if best.as_ref().map_or(true, |b| res < b.0) {
            if best.as_ref().map_or(true, |b| res < 0.999 * b.0) {
                last_gain = it;
            }
            best = Some((res, u.clone(), p.clone(), v_new.clone()));
        }
        if res <= options.outer_tol {
            return Ok(OptimalityResult {
                u0: u,
                p0: p,
                v0: v_new,
                state_reports,
                adjoint_reports,
                outer_iterations: it,
                outer_residual: res,
                residual_history: history,
                relaxation: rho,
                converged: true,
            });
        }
        if it - last_gain >= 10 {
            break;
        }
        for (a, b) in v.values_mut().iter_mut().zip(v_new.values()) {
            *a += rho * (b - *a);
        }
        let (un, rep) = solve_state(&StateProblem::new(model, f, &v, opts)?)?;
        state_reports.push(rep);
        u = un;
    }
    let (res, u0, p0, v0) = best.expect("at least one outer iteration");
    Ok(OptimalityResult {
        u0,
        p0,
        v0,
        state_reports,
        adjoint_reports,
        outer_iterations: iterations,
        outer_residual: res,
        residual_history: history,
        relaxation: rho,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    /// Stop when the preconditioned gradient norm falls below `tol` times
    /// its initial value.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient decrease constant of the Armijo test.
    pub armijo: f64,
    pub backtrack: f64,
    pub min_step: f64,
    /// Stop when one step lowers `J` by less than `stall_tol * |J|`.
    pub stall_tol: f64,
    /// Polak–Ribière conjugate directions with restarts; plain
    /// preconditioned steepest descent when false.
    pub conjugate: bool,
    pub inner: SolverOptions,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-8,
            max_iter: 500,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 1e-14,
            stall_tol: 1e-15,
            conjugate: true,
            inner: SolverOptions::tight(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DescentStatus {
    Converged,
    Stalled,
    LineSearchFailed,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub v: SpaceTimeField,
    pub u: SpaceTimeField,
    pub j_history: Vec<f64>,
    pub gradient_history: Vec<f64>,
    pub iterations: usize,
    pub status: DescentStatus,
}

/// Riesz map of `H¹(0, T)` in time on the control nodes: the Hessian of
/// the control part of `J0` restricted to levels `1..=nt`.
struct TimeRiesz {
    lu: Factored,
    nk: usize,
}

impl TimeRiesz {
    fn new(model: &Model) -> Result<Self> {
        let p = model.params();
        let (bn, mu) = (p.bn(), p.mu());
        let tg = model.tgrid();
        let (dt, nt) = (tg.dt(), tg.nt());
        let mut a = Tridiagonal::zeros(nt);
        for j in 0..nt {
            a.diag[j] = 2.0 / dt + bn * mu * dt;
            a.sub[j] = -1.0 / dt;
            a.sup[j] = -1.0 / dt;
        }
        a.diag[nt - 1] = 1.0 / dt + mu + 0.5 * bn * mu * dt;
        Ok(TimeRiesz { lu: a.factor()?, nk: nt + 1 })
    }

    /// Solves per control node; level 0 and other nodes stay zero.
    fn apply_inverse(&self, model: &Model, g: &SpaceTimeField) -> SpaceTimeField {
        let mut out = model.zeros();
        let wx = model.grid().quadrature_weights();
        for q in model.mask().nodes() {
            let mut r = g.series(q)[1..self.nk].to_vec();
            self.lu.solve_in_place(&mut r);
            out.series_mut(q)[1..].iter_mut().zip(&r).for_each(|(o, r)| *o = r / wx[q]);
        }
        out
    }
}

/// Minimizes `J0` over admissible controls, starting at `v_init`.
///
/// Directions are preconditioned by the `H¹`-in-time Riesz map on the
/// control nodes. `J0` is quadratic, so each line search starts from the
/// exact minimizing step and is then checked by Armijo backtracking; the
/// state is updated with the linearized response of the direction.
pub fn direct_minimize(
    model: &Model,
    f: &SpaceTimeField,
    v_init: &SpaceTimeField,
    options: DescentOptions,
) -> Result<DescentResult> {
    check_admissible(model, v_init)?;
    let opts = options.inner;
    let riesz = TimeRiesz::new(model)?;
    let mut v = v_init.clone();
    let (mut u, _) = solve_state(&StateProblem::new(model, f, &v, opts)?)?;
    let mut j = evaluate_j0(model, &v, &u)?.total;
    let mut j_history = vec![j];
    let mut gradient_history = Vec::new();
    let mut status = DescentStatus::MaxIterations;
    let mut g0 = None;
    let mut prev: Option<(SpaceTimeField, SpaceTimeField, f64)> = None;
    let mut iterations = 0;
    for _ in 0..options.max_iter {
        let (g, _) = gradient_vector(model, &v, &u, opts)?;
        let z = riesz.apply_inverse(model, &g);
        let gz = math::dot(g.values(), z.values());
        let gnorm = math::sqrt(gz.max(0.0));
        gradient_history.push(gnorm);
        let g0v = *g0.get_or_insert(gnorm);
        if gnorm == 0.0 || gnorm <= options.tol * g0v {
            status = DescentStatus::Converged;
            break;
        }
        let mut d = z.scaled(-1.0);
        if let (true, Some((g_old, z_old, gz_old))) = (options.conjugate, prev.as_ref()) {
            let num: f64 = g.values().iter().zip(g_old.values()).zip(z.values()).map(|((a, b), z)| (a - b) * z).sum();
            let beta = (num / gz_old).max(0.0);
            d.axpy(beta, &z_old.scaled(-1.0))?;
            if math::dot(g.values(), d.values()) >= 0.0 {
                d = z.scaled(-1.0);
            }
        }
        let slope = math::dot(g.values(), d.values());
        let (theta, _) = solve_linearized(model, &d, opts)?;
        let curv = 2.0 * (state_pairing(model, &theta, &theta)? + control_pairing(model, &d, &d)?);
        if !(curv > 0.0) {
            return Err(Error::NonFinite("descent curvature"));
        }
        let mut alpha = -slope / curv;
        let accepted = loop {
            let mut vt = v.clone();
            vt.axpy(alpha, &d)?;
            let mut ut = u.clone();
            ut.axpy(alpha, &theta)?;
            let jt = evaluate_j0(model, &vt, &ut)?.total;
            if jt <= j + options.armijo * alpha * slope {
                break Some((vt, ut, jt));
            }
            alpha *= options.backtrack;
            if alpha < options.min_step {
                break None;
            }
        };
        iterations += 1;
        let Some((vt, ut, jt)) = accepted else {
            status = DescentStatus::LineSearchFailed;
            break;
        };
        let decrease = j - jt;
        v = vt;
        u = ut;
        j = jt;
        j_history.push(j);
        prev = Some((g, z, gz));
        if decrease <= options.stall_tol * math::abs(j) {
            status = DescentStatus::Stalled;
            break;
        }
    }
    // Drop the drift accumulated by the incremental state updates.
    let (u_final, _) = solve_state(&StateProblem::new(model, f, &v, opts)?)?;
    Ok(DescentResult { v, u: u_final, j_history, gradient_history, iterations, status })
}

/// `L²(ω × (0, T))` distance between two controls.
pub fn control_distance(model: &Model, a: &SpaceTimeField, b: &SpaceTimeField) -> Result<f64> {
    a.same_layout(b)?;
    let mut d = a.clone();
    d.axpy(-1.0, b)?;
    Ok(d.l2_norm(model.mask(), Region::Omega))
}
