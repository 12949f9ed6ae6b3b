mod common;

use common::{max_diff, model_1d};
use homopt_core::optimality::{solve_optimality, OptimalityOptions};
use homopt_core::state::{residual_state, solve_backward, solve_state};
use homopt_core::{BoxRegion, Model, SolverOptions, SpaceTimeField, StateProblem, SubdomainMask, TimeOpTag};
use homopt_oracles::{DenseProblem, TimeMatrices};
use std::f64::consts::PI;

/// `An (w - Bn op(w))` on the control nodes with `op_omega`, elsewhere with `op_c`.
fn memory_term(m: &Model, w: &SpaceTimeField, op_omega: TimeOpTag, op_c: TimeOpTag) -> SpaceTimeField {
    let an = m.params().an();
    let bn = m.params().bn();
    let a = w.lift(m.ops(), op_omega).unwrap();
    let b = w.lift(m.ops(), op_c).unwrap();
    let mut out = m.zeros();
    for &p in m.interior() {
        let lifted = if m.mask().contains(p) { a.series(p) } else { b.series(p) };
        for (k, o) in out.series_mut(p).iter_mut().enumerate() {
            *o = an * (w.get(p, k) - bn * lifted[k]);
        }
    }
    out
}

fn with_added(mut a: SpaceTimeField, b: &SpaceTimeField) -> SpaceTimeField {
    a.axpy(1.0, b).unwrap();
    a
}

fn mms_errors(nx: usize, nt: usize) -> (f64, f64) {
    let m = model_1d(nx, nt);
    let opts = SolverOptions { tol: 1e-9, cg_tol: 1e-13, ..SolverOptions::default() };
    let u_star = m.field_from_fn(|x, t| (PI * x[0]).sin() * t);
    let f = with_added(
        m.field_from_fn(|x, t| (PI * x[0]).sin() * (1.0 + PI * PI * t)),
        &memory_term(&m, &u_star, TimeOpTag::H, TimeOpTag::M),
    );
    let v = m.zeros();
    let (u, rep) = solve_state(&StateProblem::new(&m, &f, &v, opts).unwrap()).unwrap();
    assert!(rep.converged, "{nx}: {} its, last {:?}", rep.iterations, &rep.residual_history[rep.residual_history.len().saturating_sub(5)..]);
    let eu = max_diff(u.values(), u_star.values());

    let p_star = m.field_from_fn(|x, t| (PI * x[0]).sin() * (-t).exp());
    let src = with_added(
        m.field_from_fn(|x, t| (PI * x[0]).sin() * (-t).exp() * (1.0 + PI * PI)),
        &memory_term(&m, &p_star, TimeOpTag::HStar, TimeOpTag::MStar),
    );
    let (p, rep) = solve_backward(&m, &src, &p_star.slice_at(nt), opts).unwrap();
    assert!(rep.converged);
    let ep = max_diff(p.values(), p_star.values());
    (eu, ep)
}

#[test]
fn manufactured_solutions_converge_at_second_order() {
    let levels = [(65, 128), (129, 256), (257, 512)];
    let errs: Vec<(f64, f64)> = levels.iter().map(|&(nx, nt)| mms_errors(nx, nt)).collect();
    for w in errs.windows(2) {
        assert!(w[0].0 / w[1].0 >= 3.5, "state errors {:?}", errs);
        assert!(w[0].1 / w[1].1 >= 3.5, "adjoint errors {:?}", errs);
    }
    assert!(errs[2].0 < 1e-4 && errs[2].1 < 1e-4, "{errs:?}");
}

fn dense_for(m: &Model) -> DenseProblem {
    let p = m.params();
    let g = m.grid();
    DenseProblem {
        nodes: g.shape().to_vec(),
        lo: p.domain().lo[..g.dim()].to_vec(),
        hi: p.domain().hi[..g.dim()].to_vec(),
        horizon: p.horizon(),
        nt: m.tgrid().nt(),
        an: p.an(),
        bn: p.bn(),
        mu: p.mu(),
        control_cost: p.control_cost(),
        omega: (0..g.num_nodes()).map(|q| m.mask().contains(q)).collect(),
    }
}

#[test]
fn dense_time_matrices_agree_with_operators() {
    let m = model_1d(5, 12);
    let t = TimeMatrices::new(m.params().bn(), m.params().mu(), 1.0, 12);
    let o = m.ops();
    for j in 0..13 {
        let mut e = vec![0.0; 13];
        e[j] = 1.0;
        let cols = [
            (o.m(&e), &t.m),
            (o.m_star(&e), &t.m_star),
            (o.gstar_h(&e), &t.gstar_h),
            (o.h_gstar(&e), &t.h_gstar),
            (o.h(&e), &t.h),
            (o.h_star(&e), &t.h_star),
        ];
        for (k, (col, mat)) in cols.iter().enumerate() {
            let dense: Vec<f64> = mat.column(j).iter().copied().collect();
            assert!(max_diff(col, &dense) < 1e-12, "operator {k}, column {j}");
        }
    }
}

#[test]
fn state_matches_dense_solve() {
    let m = model_1d(9, 16);
    let f = m.field_from_fn(|x, t| 1.0 + x[0] * (3.0 * t).cos());
    let v = m.field_from_fn(|x, t| t * (x[0] - 0.2)).restricted(m.mask(), homopt_core::Region::Omega);
    let (u, rep) = solve_state(&StateProblem::new(&m, &f, &v, SolverOptions::tight()).unwrap()).unwrap();
    assert!(rep.converged);
    let dense = dense_for(&m).solve_state(f.values(), v.values());
    assert!(max_diff(u.values(), &dense) < 1e-6, "{:e}", max_diff(u.values(), &dense));
}

#[test]
fn state_matches_dense_solve_in_two_dimensions() {
    let prm = homopt_core::make_params(
        3,
        1.0,
        0.5,
        0.5,
        2,
        BoxRegion::unit(),
        BoxRegion::new(&[0.3, 0.3], &[0.7, 0.7]).unwrap(),
    )
    .unwrap();
    let m = Model::new(prm, &[6, 5], 10).unwrap();
    assert!(m.mask().count() > 0);
    let f = m.field_from_fn(|x, t| (x[0] + 2.0 * x[1]) * (1.0 + t));
    let v = m.zeros();
    let (u, _) = solve_state(&StateProblem::new(&m, &f, &v, SolverOptions::tight()).unwrap()).unwrap();
    let dense = dense_for(&m).solve_state(f.values(), v.values());
    assert!(max_diff(u.values(), &dense) < 1e-6, "{:e}", max_diff(u.values(), &dense));
}

#[test]
fn optimality_matches_dense_solve() {
    let m = model_1d(9, 16);
    let f = m.field_from_fn(|_, _| 1.0);
    let opts = OptimalityOptions { outer_tol: 1e-10, inner: SolverOptions::tight(), ..OptimalityOptions::default() };
    let r = solve_optimality(&m, &f, opts).unwrap();
    assert!(r.converged, "{:?}", r.residual_history);
    let (u, p, v) = dense_for(&m).solve_optimality(f.values());
    assert!(max_diff(r.u0.values(), &u) < 1e-6, "u: {:e}", max_diff(r.u0.values(), &u));
    assert!(max_diff(r.p0.values(), &p) < 1e-6, "p: {:e}", max_diff(r.p0.values(), &p));
    assert!(max_diff(r.v0.values(), &v) < 1e-6, "v: {:e}", max_diff(r.v0.values(), &v));
}

#[test]
fn residual_reflects_perturbation_of_solution() {
    let m = model_1d(17, 32);
    let f = m.field_from_fn(|x, t| (PI * x[0]).sin() + t);
    let v = m.zeros();
    let prob = StateProblem::new(&m, &f, &v, SolverOptions::tight()).unwrap();
    let (u, _) = solve_state(&prob).unwrap();
    assert!(residual_state(&u, &prob).unwrap() < 1e-11);
    let mut w = u.clone();
    w.set(8, 10, w.get(8, 10) + 1e-3);
    assert!(residual_state(&w, &prob).unwrap() > 1e-5);
}

#[test]
fn empty_control_region_matches_dense_memory_only_solve() {
    let m = model_1d(9, 16);
    let m = m.clone().with_mask(SubdomainMask::empty(m.grid())).unwrap();
    let f = m.field_from_fn(|x, t| (PI * x[0]).sin() * (1.0 + 2.0 * t));
    let v = m.zeros();
    let (u, rep) = solve_state(&StateProblem::new(&m, &f, &v, SolverOptions::tight()).unwrap()).unwrap();
    assert!(rep.converged);
    let dense = dense_for(&m).solve_state(f.values(), v.values());
    assert!(max_diff(u.values(), &dense) < 1e-6, "{:e}", max_diff(u.values(), &dense));
}

#[test]
fn picard_residual_decreases_after_startup() {
    let m = model_1d(33, 64);
    let f = m.field_from_fn(|x, t| 1.0 + x[0] * t);
    let v = m.zeros();
    let (_, rep) = solve_state(&StateProblem::new(&m, &f, &v, SolverOptions::default()).unwrap()).unwrap();
    assert!(rep.converged);
    let h = &rep.residual_history;
    assert!(h.iter().skip(3).zip(h.iter().skip(4)).all(|(a, b)| b <= a), "{h:?}");
    assert_eq!(rep.relaxation, 1.0);
}
