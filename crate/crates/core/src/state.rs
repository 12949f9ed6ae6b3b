//! Space-time solvers for the limit state equation
//!
//! ```text
//! u' - Δu + An (u - Bn H(u)) χ_ω + An (u - Bn M(u)) χ_c = f + An Bn v χ_ω,   u(0) = 0,
//! ```
//!
//! its mirrored backward problem and the exact transpose of the discrete
//! forward operator.
//!
//! `H(u)` depends on future values of `u`, so the equation cannot be
//! marched in time. The memory field is frozen at the previous iterate,
//! the remaining local parabolic problem is advanced by Crank–Nicolson
//! with a conjugate-gradient solve per step, and the memory is updated
//! (Picard iteration with adaptive under-relaxation).

use alloc::vec;
use alloc::vec::Vec;

use crate::cg::pcg;
use crate::error::{Error, Result};
use crate::math;
use crate::model::Model;
use crate::space::SpaceTimeField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Picard stops once the space-time residual norm is below this value.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial under-relaxation factor.
    pub relaxation: f64,
    pub relaxation_min: f64,
    /// Relative residual target of each per-step CG solve.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Number of leading steps (trailing, for backward problems) taken with
    /// the implicit Euler weight instead of Crank–Nicolson. Zero disables.
    pub startup_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_iter: 200,
            relaxation: 1.0,
            relaxation_min: 0.25,
            cg_tol: 1e-12,
            cg_max_iter: 2000,
            startup_steps: 0,
        }
    }
}

impl SolverOptions {
    /// Tolerances tight enough that solver error is near round-off.
    pub fn tight() -> Self {
        SolverOptions { tol: 1e-12, cg_tol: 1e-14, max_iter: 400, ..Self::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Relaxation factor in use at exit.
    pub relaxation: f64,
    pub cg_iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Data of one forward solve. `v` must vanish at `t = 0` and outside the
/// control region.
#[derive(Debug, Clone)]
pub struct StateProblem<'a> {
    pub model: &'a Model,
    pub f: &'a SpaceTimeField,
    pub v: &'a SpaceTimeField,
    pub options: SolverOptions,
}

impl<'a> StateProblem<'a> {
    pub fn new(model: &'a Model, f: &'a SpaceTimeField, v: &'a SpaceTimeField, options: SolverOptions) -> Result<Self> {
        model.check_layout(f)?;
        model.check_layout(v)?;
        if f.values().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("source f"));
        }
        check_admissible(model, v)?;
        Ok(StateProblem { model, f, v, options })
    }

    /// Packed interior source `f + An Bn v χ_ω`.
    fn source(&self) -> Vec<f64> {
        let anbn = self.model.params().an() * self.model.params().bn();
        let mut b = self.model.gather(self.f);
        let v = self.model.gather(self.v);
        b.iter_mut().zip(&v).for_each(|(b, v)| *b += anbn * v);
        b
    }
}

/// Checks that `v` is finite, vanishes at `t = 0` and is zero off the
/// control region.
pub fn check_admissible(model: &Model, v: &SpaceTimeField) -> Result<()> {
    model.check_layout(v)?;
    for p in 0..model.grid().num_nodes() {
        let s = v.series(p);
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("control v"));
        }
        if s[0] != 0.0 {
            return Err(Error::InvalidParameter { name: "v", reason: alloc::format!("v(x, 0) = {} at node {p}", s[0]) });
        }
        if !model.mask().contains(p) && s.iter().any(|&x| x != 0.0) {
            return Err(Error::InvalidParameter { name: "v", reason: alloc::format!("nonzero outside the control region at node {p}") });
        }
    }
    Ok(())
}

pub fn solve_state(prob: &StateProblem) -> Result<(SpaceTimeField, SolveReport)> {
    let engine = Engine::new(prob.model, prob.options);
    let (u, rep) = engine.solve_forward(&prob.source())?;
    Ok((prob.model.scatter(&u), rep))
}

/// Discrete space-time L² norm of the state equation residual of `u0`,
/// including the initial condition.
pub fn residual_state(u0: &SpaceTimeField, prob: &StateProblem) -> Result<f64> {
    prob.model.check_layout(u0)?;
    let engine = Engine::new(prob.model, prob.options);
    let u = prob.model.gather(u0);
    let mem = engine.memory_forward(&u);
    let r = engine.residual_forward(&u, &prob.source(), &mem);
    let init: f64 = (0..engine.ni).map(|i| u[i * engine.nk] * u[i * engine.nk]).sum::<f64>() * engine.cell_volume;
    Ok(math::sqrt(r * r + init))
}

/// Solution of the state equation with `f = 0` and control `v`. The state
/// map is affine, so this is its derivative in the direction `v`.
pub fn solve_linearized(model: &Model, v: &SpaceTimeField, options: SolverOptions) -> Result<(SpaceTimeField, SolveReport)> {
    let f = model.zeros();
    let prob = StateProblem::new(model, &f, v, options)?;
    solve_state(&prob)
}

/// Backward problem
/// `-p' - Δp + An (p - Bn H*(p)) χ_ω + An (p - Bn M*(p)) χ_c = source`,
/// `p(T) = terminal`, where `terminal` holds one value per spatial node.
pub fn solve_backward(
    model: &Model,
    source: &SpaceTimeField,
    terminal: &[f64],
    options: SolverOptions,
) -> Result<(SpaceTimeField, SolveReport)> {
    model.check_layout(source)?;
    if terminal.len() != model.grid().num_nodes() {
        return Err(Error::GridMismatch("terminal data length differs from node count"));
    }
    let engine = Engine::new(model, options);
    let term: Vec<f64> = model.interior().iter().map(|&p| terminal[p]).collect();
    let (p, rep) = engine.solve_backward(&model.gather(source), &term)?;
    Ok((model.scatter(&p), rep))
}

/// Residual norm of the backward problem, including the terminal condition.
pub fn residual_backward(
    p0: &SpaceTimeField,
    model: &Model,
    source: &SpaceTimeField,
    terminal: &[f64],
    options: SolverOptions,
) -> Result<f64> {
    model.check_layout(p0)?;
    model.check_layout(source)?;
    let engine = Engine::new(model, options);
    let p = model.gather(p0);
    let term: Vec<f64> = model.interior().iter().map(|&q| terminal[q]).collect();
    let mem = engine.memory_backward(&p);
    let r = engine.residual_backward(&p, &model.gather(source), &mem);
    let nt = engine.nt;
    let end: f64 = (0..engine.ni).map(|i| { let d = p[i * engine.nk + nt] - term[i]; d * d }).sum::<f64>() * engine.cell_volume;
    Ok(math::sqrt(r * r + end))
}

/// Solves `L^T y = g`, where `L` is the discrete forward operator acting on
/// the interior values at levels `1..=nt` (level 0 is pinned to zero).
/// Both `g` and `y` are read in plain Euclidean coordinates; level 0 of `g`
/// is ignored and level 0 of `y` is zero.
pub fn solve_state_transpose(model: &Model, g: &SpaceTimeField, options: SolverOptions) -> Result<(SpaceTimeField, SolveReport)> {
    model.check_layout(g)?;
    let engine = Engine::new(model, options);
    let (y, rep) = engine.solve_transpose(&model.gather(g))?;
    Ok((model.scatter(&y), rep))
}

/// Applies the discrete forward operator: returns the per-step residual
/// `P u^k - Q u^{k-1} - (memory + source averages)` for `k = 1..=nt` with
/// zero source, stored at level `k` (level 0 is zero). Used to test
/// [`solve_state_transpose`].
pub fn apply_state_operator(model: &Model, u: &SpaceTimeField, options: SolverOptions) -> Result<SpaceTimeField> {
    model.check_layout(u)?;
    let engine = Engine::new(model, options);
    let mut x = model.gather(u);
    for i in 0..engine.ni {
        x[i * engine.nk] = 0.0;
    }
    let mem = engine.memory_forward(&x);
    let zero = vec![0.0; x.len()];
    Ok(model.scatter(&engine.forward_rows(&x, &zero, &mem)))
}

pub(crate) struct Engine<'m> {
    model: &'m Model,
    opts: SolverOptions,
    ni: usize,
    nk: usize,
    nt: usize,
    dt: f64,
    an: f64,
    anbn: f64,
    cell_volume: f64,
    controlled: Vec<bool>,
    theta_fwd: Vec<f64>,
    theta_bwd: Vec<f64>,
    diag_half: Vec<f64>,
    diag_one: Vec<f64>,
}

impl<'m> Engine<'m> {
    pub(crate) fn new(model: &'m Model, opts: SolverOptions) -> Self {
        let nt = model.tgrid().nt();
        let dt = model.tgrid().dt();
        let an = model.params().an();
        let s = opts.startup_steps.min(nt);
        // theta[j] is the implicit weight of interval j = (t_{j-1}, t_j)
        let mut theta_fwd = vec![0.5; nt + 1];
        let mut theta_bwd = vec![0.5; nt + 1];
        for j in 1..=s {
            theta_fwd[j] = 1.0;
            theta_bwd[nt + 1 - j] = 1.0;
        }
        let st = model.stencil();
        let diag = |th: f64| st.diag.iter().map(|d| 1.0 / dt + th * (d + an)).collect();
        Engine {
            model,
            opts,
            ni: model.interior().len(),
            nk: nt + 1,
            nt,
            dt,
            an,
            anbn: an * model.params().bn(),
            cell_volume: model.grid().cell_volume(),
            controlled: model.interior().iter().map(|&p| model.mask().contains(p)).collect(),
            theta_fwd,
            theta_bwd,
            diag_half: diag(0.5),
            diag_one: diag(1.0),
        }
    }

    fn level(&self, x: &[f64], k: usize) -> Vec<f64> {
        (0..self.ni).map(|i| x[i * self.nk + k]).collect()
    }

    fn put_level(&self, x: &mut [f64], k: usize, vals: &[f64]) {
        for i in 0..self.ni {
            x[i * self.nk + k] = vals[i];
        }
    }

    /// `(I/dt + th A) x` with `A = -Δ + An`.
    fn apply_p(&self, th: f64, x: &[f64], y: &mut [f64]) {
        self.model.stencil().apply_shifted(1.0 / self.dt + th * self.an, th, x, y);
    }

    /// `(I/dt - (1 - th) A) x`.
    fn apply_q(&self, th: f64, x: &[f64], y: &mut [f64]) {
        let w = 1.0 - th;
        self.model.stencil().apply_shifted(1.0 / self.dt - w * self.an, -w, x, y);
    }

    fn solve_p(&self, th: f64, rhs: &[f64], x: &mut [f64]) -> usize {
        let diag = if th == 1.0 { &self.diag_one } else { &self.diag_half };
        let rep = pcg(|p, y| self.apply_p(th, p, y), diag, rhs, x, self.opts.cg_tol, self.opts.cg_max_iter);
        rep.iterations
    }

    fn per_node(&self, x: &[f64], f: impl Fn(bool, &[f64]) -> Vec<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.len());
        for i in 0..self.ni {
            let y = f(self.controlled[i], &x[i * self.nk..(i + 1) * self.nk]);
            out.extend(y.into_iter().map(|v| self.anbn * v));
        }
        out
    }

    /// `An Bn (H(u) χ_ω + M(u) χ_c)`.
    pub(crate) fn memory_forward(&self, u: &[f64]) -> Vec<f64> {
        let ops = self.model.ops();
        self.per_node(u, |c, s| if c { ops.h(s) } else { ops.m(s) })
    }

    /// `An Bn (H*(p) χ_ω + M*(p) χ_c)`.
    pub(crate) fn memory_backward(&self, p: &[f64]) -> Vec<f64> {
        let ops = self.model.ops();
        self.per_node(p, |c, s| if c { ops.h_star(s) } else { ops.m_star(s) })
    }

    /// Transposed memory contribution to the rows of `L^T`: the cotangent
    /// of the averaged sources, mapped back through the memory operators.
    fn memory_transpose(&self, y: &[f64]) -> Vec<f64> {
        let ops = self.model.ops();
        let nt = self.nt;
        let th = &self.theta_fwd;
        let mut out = self.per_node(y, |c, s| {
            let mut sigma = vec![0.0; nt + 1];
            for i in 0..=nt {
                if i >= 1 {
                    sigma[i] += th[i] * s[i];
                }
                if i < nt {
                    sigma[i] += (1.0 - th[i + 1]) * s[i + 1];
                }
            }
            if c {
                ops.h_transpose(&sigma)
            } else {
                ops.m_transpose(&sigma)
            }
        });
        for i in 0..self.ni {
            out[i * self.nk] = 0.0;
        }
        out
    }

    fn norm(&self, r: &[f64]) -> f64 {
        math::sqrt(self.dt * self.cell_volume * math::dot(r, r))
    }

    fn check_finite(x: &[f64]) -> Result<()> {
        if x.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("Picard iterate"))
        }
    }

    /// Generic relaxed Picard loop. `sweep` advances the local problem with
    /// the frozen memory, `freeze` evaluates the memory of an iterate and
    /// `residual` measures the coupled residual given both.
    fn picard(
        &self,
        sweep: impl Fn(&[f64], &mut Vec<f64>) -> usize,
        freeze: impl Fn(&[f64]) -> Vec<f64>,
        residual: impl Fn(&[f64], &[f64]) -> f64,
    ) -> Result<(Vec<f64>, SolveReport)> {
        let n = self.ni * self.nk;
        let mut x = vec![0.0; n];
        let mut frozen = vec![0.0; n];
        let mut rho = self.opts.relaxation;
        let mut prev = f64::INFINITY;
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut history = Vec::new();
        let mut cg_total = 0;
        let mut converged = false;
        let mut iterations = 0;
        let mut last_gain = 0;
        for it in 1..=self.opts.max_iter.max(1) {
            iterations = it;
            let mut next = x.clone();
            cg_total += sweep(&frozen, &mut next);
            Self::check_finite(&next)?;
            if rho == 1.0 {
                x = next;
            } else {
                x.iter_mut().zip(&next).for_each(|(a, b)| *a += rho * (b - *a));
            }
            frozen = freeze(&x);
            let res = residual(&x, &frozen);
            if !res.is_finite() {
                return Err(Error::NonFinite("Picard residual"));
            }
            history.push(res);
            if res <= self.opts.tol {
                converged = true;
                best = None;
                break;
            }
            if best.as_ref().map_or(true, |(_, r)| res < *r) {
                if best.as_ref().map_or(true, |(_, r)| res < 0.999 * *r) {
                    last_gain = it;
                }
                best = Some((x.clone(), res));
            }
            // at the round-off floor further sweeps cannot help
            if it - last_gain >= 10 {
                break;
            }
            if res > prev && rho > self.opts.relaxation_min {
                rho = (0.5 * rho).max(self.opts.relaxation_min);
            }
            prev = res;
        }
        let final_residual = *history.last().unwrap_or(&0.0);
        let (x, final_residual) = match best {
            Some((b, r)) if !converged && r < final_residual => (b, r),
            _ => (x, final_residual),
        };
        Ok((
            x,
            SolveReport {
                iterations,
                final_residual,
                converged,
                relaxation: rho,
                cg_iterations: cg_total,
                residual_history: history,
            },
        ))
    }

    fn sweep_forward(&self, s: &[f64], x: &mut [f64]) -> usize {
        let mut cg = 0;
        let zero = vec![0.0; self.ni];
        self.put_level(x, 0, &zero);
        let mut rhs = vec![0.0; self.ni];
        for j in 1..=self.nt {
            let th = self.theta_fwd[j];
            let prev = self.level(x, j - 1);
            self.apply_q(th, &prev, &mut rhs);
            for i in 0..self.ni {
                rhs[i] += th * s[i * self.nk + j] + (1.0 - th) * s[i * self.nk + j - 1];
            }
            let mut cur = self.level(x, j);
            cg += self.solve_p(th, &rhs, &mut cur);
            self.put_level(x, j, &cur);
        }
        cg
    }

    /// Rows `P u^j - Q u^{j-1} - avg(b + mem)` for `j = 1..=nt`, packed with
    /// zeros at level 0.
    fn forward_rows(&self, u: &[f64], b: &[f64], mem: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        let mut pu = vec![0.0; self.ni];
        let mut qu = vec![0.0; self.ni];
        for j in 1..=self.nt {
            let th = self.theta_fwd[j];
            self.apply_p(th, &self.level(u, j), &mut pu);
            self.apply_q(th, &self.level(u, j - 1), &mut qu);
            for i in 0..self.ni {
                let a = i * self.nk + j;
                let src = th * (b[a] + mem[a]) + (1.0 - th) * (b[a - 1] + mem[a - 1]);
                out[a] = pu[i] - qu[i] - src;
            }
        }
        out
    }

    pub(crate) fn residual_forward(&self, u: &[f64], b: &[f64], mem: &[f64]) -> f64 {
        self.norm(&self.forward_rows(u, b, mem))
    }

    pub(crate) fn solve_forward(&self, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.picard(
            |frozen, x| {
                let s: Vec<f64> = b.iter().zip(frozen).map(|(b, m)| b + m).collect();
                self.sweep_forward(&s, x)
            },
            |x| self.memory_forward(x),
            |x, mem| self.residual_forward(x, b, mem),
        )
    }

    fn sweep_backward(&self, s: &[f64], terminal: &[f64], x: &mut [f64]) -> usize {
        let mut cg = 0;
        self.put_level(x, self.nt, terminal);
        let mut rhs = vec![0.0; self.ni];
        for j in (1..=self.nt).rev() {
            let th = self.theta_bwd[j];
            let prev = self.level(x, j);
            self.apply_q(th, &prev, &mut rhs);
            for i in 0..self.ni {
                rhs[i] += th * s[i * self.nk + j - 1] + (1.0 - th) * s[i * self.nk + j];
            }
            let mut cur = self.level(x, j - 1);
            cg += self.solve_p(th, &rhs, &mut cur);
            self.put_level(x, j - 1, &cur);
        }
        cg
    }

    fn residual_backward(&self, p: &[f64], src: &[f64], mem: &[f64]) -> f64 {
        let mut r = Vec::with_capacity(self.ni * self.nt);
        let mut pp = vec![0.0; self.ni];
        let mut qp = vec![0.0; self.ni];
        for j in 1..=self.nt {
            let th = self.theta_bwd[j];
            self.apply_p(th, &self.level(p, j - 1), &mut pp);
            self.apply_q(th, &self.level(p, j), &mut qp);
            for i in 0..self.ni {
                let a = i * self.nk + j;
                let s = th * (src[a - 1] + mem[a - 1]) + (1.0 - th) * (src[a] + mem[a]);
                r.push(pp[i] - qp[i] - s);
            }
        }
        self.norm(&r)
    }

    pub(crate) fn solve_backward(&self, src: &[f64], terminal: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.picard(
            |frozen, x| {
                let s: Vec<f64> = src.iter().zip(frozen).map(|(b, m)| b + m).collect();
                self.sweep_backward(&s, terminal, x)
            },
            |x| self.memory_backward(x),
            |x, mem| self.residual_backward(x, src, mem),
        )
    }

    fn sweep_transpose(&self, c: &[f64], x: &mut [f64]) -> usize {
        let mut cg = 0;
        let mut rhs = vec![0.0; self.ni];
        let mut q = vec![0.0; self.ni];
        for j in (1..=self.nt).rev() {
            if j < self.nt {
                self.apply_q(self.theta_fwd[j + 1], &self.level(x, j + 1), &mut q);
            } else {
                q.iter_mut().for_each(|v| *v = 0.0);
            }
            for i in 0..self.ni {
                rhs[i] = c[i * self.nk + j] + q[i];
            }
            let mut cur = self.level(x, j);
            cg += self.solve_p(self.theta_fwd[j], &rhs, &mut cur);
            self.put_level(x, j, &cur);
        }
        let zero = vec![0.0; self.ni];
        self.put_level(x, 0, &zero);
        cg
    }

    fn residual_transpose(&self, y: &[f64], g: &[f64], memt: &[f64]) -> f64 {
        let mut r = Vec::with_capacity(self.ni * self.nt);
        let mut py = vec![0.0; self.ni];
        let mut qy = vec![0.0; self.ni];
        for j in 1..=self.nt {
            self.apply_p(self.theta_fwd[j], &self.level(y, j), &mut py);
            if j < self.nt {
                self.apply_q(self.theta_fwd[j + 1], &self.level(y, j + 1), &mut qy);
            } else {
                qy.iter_mut().for_each(|v| *v = 0.0);
            }
            for i in 0..self.ni {
                let a = i * self.nk + j;
                r.push(py[i] - qy[i] - g[a] - memt[a]);
            }
        }
        self.norm(&r)
    }

    pub(crate) fn solve_transpose(&self, g: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
        self.picard(
            |frozen, x| {
                let c: Vec<f64> = g.iter().zip(frozen).map(|(g, m)| g + m).collect();
                self.sweep_transpose(&c, x)
            },
            |x| self.memory_transpose(x),
            |x, memt| self.residual_transpose(x, g, memt),
        )
    }

    /// `(S^T y)` in the source slot: the Euclidean cotangent of the full
    /// source history `b` for rows `y`.
    pub(crate) fn source_transpose(&self, y: &[f64]) -> Vec<f64> {
        let nt = self.nt;
        let th = &self.theta_fwd;
        let mut out = vec![0.0; y.len()];
        for i in 0..self.ni {
            let s = &y[i * self.nk..(i + 1) * self.nk];
            for k in 0..=nt {
                let mut v = 0.0;
                if k >= 1 {
                    v += th[k] * s[k];
                }
                if k < nt {
                    v += (1.0 - th[k + 1]) * s[k + 1];
                }
                out[i * self.nk + k] = v;
            }
        }
        out
    }
}

/// Euclidean cotangent of the source history for rows `y` of the forward
/// operator (the transpose of the step averaging).
pub fn source_transpose(model: &Model, y: &SpaceTimeField, options: SolverOptions) -> Result<SpaceTimeField> {
    model.check_layout(y)?;
    let engine = Engine::new(model, options);
    Ok(model.scatter(&engine.source_transpose(&model.gather(y))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{make_params, BoxRegion};
    use crate::math::PI;

    fn model(nx: usize, nt: usize) -> Model {
        let p = make_params(3, 1.0, 1.0, 1.0, 1, BoxRegion::unit(), BoxRegion::new(&[0.25], &[0.75]).unwrap()).unwrap();
        Model::new(p, &[nx], nt).unwrap()
    }

    fn control(m: &Model, scale: f64) -> SpaceTimeField {
        m.field_from_fn(|x, t| scale * t * libm::sin(PI * x[0]) * (1.0 + t)).restricted(m.mask(), crate::Region::Omega)
    }

    #[test]
    fn zero_data_gives_zero_in_one_iteration() {
        let m = model(9, 16);
        let z = m.zeros();
        let prob = StateProblem::new(&m, &z, &z, SolverOptions::default()).unwrap();
        let (u, rep) = solve_state(&prob).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(residual_state(&u, &prob).unwrap(), 0.0);
    }

    #[test]
    fn converged_residual_below_tolerance() {
        let m = model(17, 32);
        let f = m.field_from_fn(|x, t| libm::sin(PI * x[0]) + t);
        let v = control(&m, 1.0);
        let prob = StateProblem::new(&m, &f, &v, SolverOptions::default()).unwrap();
        let (u, rep) = solve_state(&prob).unwrap();
        assert!(rep.converged, "{rep:?}");
        assert!(residual_state(&u, &prob).unwrap() <= 1e-8);
        assert!(u.is_zero_on_boundary());
        // residual grows linearly in a single-node perturbation
        let mut w = u.clone();
        let node = m.interior()[3];
        w.set(node, 10, u.get(node, 10) + 1e-3);
        let r1 = residual_state(&w, &prob).unwrap();
        w.set(node, 10, u.get(node, 10) + 2e-3);
        let r2 = residual_state(&w, &prob).unwrap();
        assert!((r2 / r1 - 2.0).abs() < 1e-3);
    }

    #[test]
    fn linearized_is_homogeneous_and_affine() {
        let m = model(9, 32);
        let opts = SolverOptions::tight();
        let v = control(&m, 1.0);
        let (t1, _) = solve_linearized(&m, &v, opts).unwrap();
        let (t2, _) = solve_linearized(&m, &v.scaled(2.0), opts).unwrap();
        let mut d = t2.clone();
        d.axpy(-2.0, &t1).unwrap();
        assert!(d.max_abs() < 1e-10);

        let f = m.field_from_fn(|_, _| 1.0);
        let v1 = control(&m, 0.3);
        let pa = StateProblem::new(&m, &f, &v1, opts).unwrap();
        let (ua, _) = solve_state(&pa).unwrap();
        let mut v12 = v1.clone();
        v12.axpy(1.0, &v).unwrap();
        let pb = StateProblem::new(&m, &f, &v12, opts).unwrap();
        let (ub, _) = solve_state(&pb).unwrap();
        let mut diff = ub.clone();
        diff.axpy(-1.0, &ua).unwrap();
        diff.axpy(-1.0, &t1).unwrap();
        assert!(diff.max_abs() < 1e-10);
    }

    #[test]
    fn inadmissible_controls_rejected() {
        let m = model(9, 8);
        let f = m.zeros();
        let bad_start = m.field_from_fn(|_, _| 1.0).restricted(m.mask(), crate::Region::Omega);
        assert!(StateProblem::new(&m, &f, &bad_start, SolverOptions::default()).is_err());
        let outside = m.field_from_fn(|_, t| t);
        assert!(StateProblem::new(&m, &f, &outside, SolverOptions::default()).is_err());
    }

    #[test]
    fn transpose_solve_pairs_with_forward_operator() {
        let m = model(7, 12);
        let opts = SolverOptions::tight();
        let mut u = m.field_from_fn(|x, t| libm::sin(3.0 * x[0] + 2.0 * t) * t);
        for p in 0..m.grid().num_nodes() {
            if m.grid().is_boundary(p) {
                u.series_mut(p).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let g = m.field_from_fn(|x, t| libm::cos(5.0 * x[0] - t) + x[0]);
        let mut g = g;
        for p in 0..m.grid().num_nodes() {
            g.set(p, 0, 0.0);
            if m.grid().is_boundary(p) {
                g.series_mut(p).iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let (y, rep) = solve_state_transpose(&m, &g, opts).unwrap();
        assert!(rep.converged);
        let lu = apply_state_operator(&m, &u, opts).unwrap();
        let lhs = math::dot(lu.values(), y.values());
        let rhs = math::dot(u.values(), g.values());
        assert!((lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn backward_terminal_only() {
        let m = model(9, 16);
        let src = m.zeros();
        let term: Vec<f64> = (0..9).map(|p| if m.grid().is_boundary(p) { 0.0 } else { 1.0 + p as f64 }).collect();
        let (p, rep) = solve_backward(&m, &src, &term, SolverOptions::default()).unwrap();
        assert!(rep.converged);
        for q in 0..9 {
            assert_eq!(p.get(q, 16), term[q]);
        }
        let r = residual_backward(&p, &m, &src, &term, SolverOptions::default()).unwrap();
        assert!(r <= 1e-8);
    }
}
