mod common;

use common::{max_abs, max_diff, params_1d, Smooth};
use homopt_core::time::{apply_h, apply_hstar, bvp_gstar_h, bvp_h_gstar, inner_product, relax_backward, relax_forward};
use homopt_core::{MemoryOperators, TimeGrid, TimeSeries};
use homopt_oracles::{picard_h, relax, shoot_bvp, RobinEnd};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ops(nt: usize) -> MemoryOperators {
    MemoryOperators::new(&params_1d(), TimeGrid::new(1.0, nt).unwrap()).unwrap()
}

fn pairs(seed: u64, count: usize) -> Vec<(Smooth, Smooth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (Smooth::random(&mut rng, 4), Smooth::random(&mut rng, 4))).collect()
}

/// Sum over the pairs of the normalized duality gap of `(op, adjoint)`.
fn duality_gap(nt: usize, op: &str, list: &[(Smooth, Smooth)]) -> f64 {
    let o = ops(nt);
    let grid = *o.grid();
    let (fwd, adj): (fn(&MemoryOperators, &[f64]) -> Vec<f64>, fn(&MemoryOperators, &[f64]) -> Vec<f64>) = match op {
        "M" => (MemoryOperators::m, MemoryOperators::m_star),
        "G" => (MemoryOperators::g, MemoryOperators::g_star),
        _ => (MemoryOperators::h, MemoryOperators::h_star),
    };
    let mut worst = 0.0f64;
    let mut total = 0.0;
    for (a, b) in list {
        let phi = a.sample(grid);
        let psi = b.sample(grid);
        let lhs = inner_product(&TimeSeries::new(grid, fwd(&o, phi.values())).unwrap(), &psi).unwrap();
        let rhs = inner_product(&phi, &TimeSeries::new(grid, adj(&o, psi.values())).unwrap()).unwrap();
        let norm = common::l2_time(&phi) * common::l2_time(&psi);
        let gap = (lhs - rhs).abs() / norm;
        worst = worst.max(gap);
        total += gap;
    }
    assert!(worst <= 1e-4 || nt < 256, "{op}: worst normalized gap {worst:e} at nt = {nt}");
    total
}

#[test]
fn dualities_hold_to_second_order() {
    let list = pairs(7, 20);
    for op in ["M", "G", "H"] {
        let coarse = duality_gap(256, op, &list);
        let fine = duality_gap(512, op, &list);
        assert!(coarse / fine >= 3.5 || coarse < 1e-12, "{op}: ratio {}", coarse / fine);
    }
}

fn composition_gaps(nt: usize, phi: &Smooth) -> [f64; 3] {
    let o = ops(nt);
    let grid = *o.grid();
    let p = phi.sample(grid);
    let x = p.values();
    let norm = max_abs(x);
    let mu_over_n = params_1d().mu() / params_1d().control_cost();
    // G*(H(phi)) against G* applied to H(phi)
    let i1 = max_diff(&o.gstar_h(x), &o.g_star(&o.h(x))) / norm;
    let i2 = max_diff(&o.h_gstar(x), &o.g(&o.h_star(x))) / norm;
    let g = o.g(x);
    let rhs: Vec<f64> = g.iter().zip(o.g(&o.h_star(&g))).map(|(a, b)| a + mu_over_n * b).collect();
    let ii = max_diff(&o.h(x), &rhs) / norm;
    [i1, i2, ii]
}

#[test]
fn composition_identities_converge() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let phi = Smooth::random(&mut rng, 3);
        let c = composition_gaps(256, &phi);
        let f = composition_gaps(512, &phi);
        for k in 0..3 {
            assert!(c[k] <= 1e-4, "identity {k}: {:e}", c[k]);
            assert!(c[k] / f[k] >= 3.5, "identity {k}: ratio {}", c[k] / f[k]);
        }
    }
}

#[test]
fn two_point_problems_match_shooting() {
    let prm = params_1d();
    let (kappa, mu) = (prm.bn() * prm.mu(), prm.mu());
    let nt = 2000;
    let grid = TimeGrid::new(1.0, nt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let s = Smooth::random(&mut rng, 4);
        let phi = s.sample(grid);
        let (a, _) = shoot_bvp(RobinEnd::Start, kappa, mu, 1.0, nt, 4, |t| s.eval(t));
        let (b, _) = shoot_bvp(RobinEnd::End, kappa, mu, 1.0, nt, 4, |t| s.eval(t));
        let ga = bvp_gstar_h(&phi, &prm).unwrap();
        let hb = bvp_h_gstar(&phi, &prm).unwrap();
        assert!(max_diff(ga.values(), &a) < 1e-6, "{:e}", max_diff(ga.values(), &a));
        assert!(max_diff(hb.values(), &b) < 1e-6, "{:e}", max_diff(hb.values(), &b));
    }
}

#[test]
fn named_sources_match_shooting_at_second_order() {
    let prm = params_1d();
    let (kappa, mu) = (prm.bn() * prm.mu(), prm.mu());
    let pi = std::f64::consts::PI;
    let mut prev = [f64::INFINITY; 2];
    for nt in [250, 500, 1000, 2000] {
        let grid = TimeGrid::new(1.0, nt).unwrap();
        let a = bvp_gstar_h(&TimeSeries::from_fn(grid, |t| (pi * t).sin()), &prm).unwrap();
        let (sa, _) = shoot_bvp(RobinEnd::Start, kappa, mu, 1.0, nt, 2, |t| (pi * t).sin());
        let b = bvp_h_gstar(&TimeSeries::from_fn(grid, |t| (0.5 * pi * t).cos()), &prm).unwrap();
        let (sb, _) = shoot_bvp(RobinEnd::End, kappa, mu, 1.0, nt, 2, |t| (0.5 * pi * t).cos());
        let e = [max_diff(a.values(), &sa), max_diff(b.values(), &sb)];
        for k in 0..2 {
            assert!(prev[k] / e[k] >= 3.5, "nt = {nt}: {:e} after {:e}", e[k], prev[k]);
        }
        if nt == 2000 {
            assert!(e[0] < 1e-6 && e[1] < 1e-6);
        }
        prev = e;
    }
}

#[test]
fn h_matches_picard_oracle() {
    let prm = params_1d();
    let pi = std::f64::consts::PI;
    let nt = 2000;
    let grid = TimeGrid::new(1.0, nt).unwrap();
    let h = apply_h(&TimeSeries::from_fn(grid, |t| (2.0 * pi * t).sin()), &prm).unwrap();
    let oracle = picard_h(prm.bn(), prm.mu(), 1.0, nt, 4, false, |t| (2.0 * pi * t).sin());
    assert!(max_diff(h.values(), &oracle) < 1e-6, "{:e}", max_diff(h.values(), &oracle));
    assert!(h.values()[0].abs() < 1e-8);

    let hs = apply_hstar(&TimeSeries::from_fn(grid, |t| t), &prm).unwrap();
    let oracle = picard_h(prm.bn(), prm.mu(), 1.0, nt, 4, true, |t| t);
    assert!(max_diff(hs.values(), &oracle) < 1e-6, "{:e}", max_diff(hs.values(), &oracle));
    assert!(hs.values()[nt].abs() < 1e-8);
}

#[test]
fn h_converges_at_second_order() {
    let prm = params_1d();
    let mut prev = f64::INFINITY;
    for nt in [64, 128, 256] {
        let grid = TimeGrid::new(1.0, nt).unwrap();
        let h = apply_h(&TimeSeries::from_fn(grid, |t| (3.0 * t).cos()), &prm).unwrap();
        let oracle = picard_h(prm.bn(), prm.mu(), 1.0, nt, 8, false, |t| (3.0 * t).cos());
        let e = max_diff(h.values(), &oracle);
        assert!(prev / e >= 3.5, "nt = {nt}: {e:e} after {prev:e}");
        prev = e;
    }
}

#[test]
fn relaxation_matches_rk4() {
    let lam = 1.7;
    let grid = TimeGrid::new(2.0, 400).unwrap();
    let phi = TimeSeries::from_fn(grid, |t| (-lam * t).exp());
    let y = relax_forward(&phi, lam).unwrap();
    let mid = 200;
    let t = grid.node(mid);
    assert!((y.values()[mid] - t * (-lam * t).exp()).abs() < 1e-5);
    let oracle = relax(lam, 2.0, 400, 8, false, |t| (-lam * t).exp());
    assert!(max_diff(y.values(), &oracle) < 1e-5);

    let psi = TimeSeries::from_fn(grid, |t| (t * t).sin());
    let z = relax_backward(&psi, 0.8).unwrap();
    let oracle = relax(0.8, 2.0, 400, 8, true, |t| (t * t).sin());
    assert!(max_diff(z.values(), &oracle) < 1e-4);
}

#[test]
fn affine_sources_are_integrated_exactly() {
    let grid = TimeGrid::new(1.0, 7).unwrap();
    let phi = TimeSeries::from_fn(grid, |t| 2.0 - 3.0 * t);
    let y = relax_forward(&phi, 1.3).unwrap();
    let exact = |t: f64| {
        // y' + r y = a + b t, y(0) = 0
        let (a, b, r) = (2.0, -3.0, 1.3);
        let c = a / r - b / (r * r);
        c + b * t / r - c * (-r * t).exp()
    };
    for (k, v) in y.values().iter().enumerate() {
        assert!((v - exact(grid.node(k))).abs() < 1e-14);
    }
}
