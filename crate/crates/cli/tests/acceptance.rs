//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status
//! if any criterion fails. Runs without the libtest harness so the lines are
//! always shown.

use std::process::Command;
use std::time::Instant;

use homopt::config::RunConfig;
use homopt::suite::{
    bvp_study, capacity_gap, composition_study, cross_check, decomposition_study, dense_study, duality_study,
    fp_study, gradient_study, mms_errors,
};
use homopt_core::optimality::OptimalityOptions;
use homopt_core::params::capacity_constant;
use homopt_core::{Model, ModelParams, SolverOptions};

const SEED: u64 = 42;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn params() -> ModelParams {
    RunConfig::default().params().unwrap()
}

fn model(nodes: usize, nt: usize) -> Model {
    Model::new(params(), &[nodes], nt).unwrap()
}

fn dualities() -> Outcome {
    let (worst, coarse) = duality_study(&params(), 256, SEED, 20);
    let (_, fine) = duality_study(&params(), 512, SEED, 20);
    let ratio: Vec<f64> = (0..3).map(|i| coarse[i] / fine[i]).collect();
    let ok = worst.iter().all(|&g| g <= 1e-4) && ratio.iter().all(|&r| r >= 3.5);
    outcome(ok, format!("worst gap M/G/H {:.2e} {:.2e} {:.2e}, ratio {:.2} {:.2} {:.2}", worst[0], worst[1], worst[2], ratio[0], ratio[1], ratio[2]))
}

fn compositions() -> Outcome {
    let c = composition_study(&params(), 256, SEED, 5);
    let f = composition_study(&params(), 512, SEED, 5);
    let ratio: Vec<f64> = (0..3).map(|i| c[i] / f[i]).collect();
    let ok = c.iter().all(|&g| g <= 1e-4) && ratio.iter().all(|&r| r >= 3.5);
    outcome(ok, format!("gaps {:.2e} {:.2e} {:.2e}, ratio {:.2} {:.2} {:.2}", c[0], c[1], c[2], ratio[0], ratio[1], ratio[2]))
}

fn two_point_problems() -> Outcome {
    let e = bvp_study(&params(), 2000, SEED, 5);
    outcome(e[0] <= 1e-6 && e[1] <= 1e-6, format!("G*H {:.2e}, HG* {:.2e} (max norm)", e[0], e[1]))
}

fn capacity() -> Outcome {
    let mut worst = 0.0f64;
    for n in [3, 4, 5] {
        for c0 in [0.5, 1.0, 2.0] {
            worst = worst.max(capacity_gap(n, c0, capacity_constant(n, c0)));
        }
    }
    outcome(worst <= 1e-2, format!("worst relative gap {worst:.2e} over 9 (n, C0) pairs"))
}

fn manufactured() -> Outcome {
    let errs: Vec<(f64, f64)> = [(65, 128), (129, 256), (257, 512)].iter().map(|&(n, nt)| mms_errors(&params(), &[n], nt)).collect();
    let rs: Vec<f64> = errs.windows(2).map(|w| w[0].0 / w[1].0).collect();
    let ra: Vec<f64> = errs.windows(2).map(|w| w[0].1 / w[1].1).collect();
    let ok = rs.iter().chain(&ra).all(|&r| r >= 3.5);
    outcome(ok, format!("state ratios {:.2} {:.2}, adjoint ratios {:.2} {:.2}, finest {:.2e}/{:.2e}", rs[0], rs[1], ra[0], ra[1], errs[2].0, errs[2].1))
}

fn dense() -> Outcome {
    let (s, o) = dense_study(&model(9, 16), SEED);
    outcome(s <= 1e-6 && o <= 1e-6, format!("state {s:.2e}, optimality {o:.2e}"))
}

fn fp_identity() -> Outcome {
    let opts = OptimalityOptions {
        inner: SolverOptions { tol: 1e-10, ..SolverOptions::default() },
        outer_tol: 1e-9,
        ..OptimalityOptions::default()
    };
    let gap = |n: usize, nt: usize| {
        let m = model(n, nt);
        let f = m.field_from_fn(|_, _| 1.0);
        fp_study(&m, &f, opts).map(|g| g.0)
    };
    match (gap(65, 128), gap(129, 256)) {
        (Some(a), Some(b)) => outcome(a <= 1e-3 && a / b >= 3.5, format!("gap {a:.2e} at 65x128, {b:.2e} at 129x256, ratio {:.2}", a / b)),
        _ => outcome(false, "optimality iteration did not converge".into()),
    }
}

fn optimality_cross_check() -> Outcome {
    let m = model(9, 2048);
    let f = m.field_from_fn(|_, _| 1.0);
    let c = cross_check(&m, &f, SEED, 10);
    let ok = c.j_gap <= 1e-6 && c.control_gap <= 1e-2 && c.stationarity <= 1e-6 && c.min_increase >= 0.0;
    outcome(
        ok,
        format!(
            "|dJ| {:.2e}, |v*-v0|/|v0| {:.2e}, stationarity {:.2e}, min increase {:.2e}",
            c.j_gap, c.control_gap, c.stationarity, c.min_increase
        ),
    )
}

fn decompositions() -> Outcome {
    let coarse = decomposition_study(&model(17, 64));
    let fine = decomposition_study(&model(17, 128));
    let dt2 = (1.0f64 / 64.0).powi(2);
    let bound: Vec<f64> = coarse.iter().map(|(g, n)| g / (dt2 * n)).collect();
    let ratio: Vec<f64> = (0..3).map(|i| coarse[i].0 / fine[i].0).collect();
    let ok = bound.iter().all(|&c| c <= 10.0) && ratio.iter().all(|&r| r >= 3.5);
    outcome(ok, format!("C = {:.2} {:.2} {:.2} (<= 10), ratio {:.2} {:.2} {:.2}", bound[0], bound[1], bound[2], ratio[0], ratio[1], ratio[2]))
}

fn gradient() -> Outcome {
    let m = model(17, 64);
    let f = m.field_from_fn(|x, t| 1.0 + (std::f64::consts::PI * x[0]).sin() * t);
    let worst = gradient_study(&m, &f, SEED, 5);
    outcome(worst <= 1e-5, format!("worst relative mismatch {worst:.2e} over 5 pairs"))
}

fn verify_exit_discipline() -> Outcome {
    let dir = std::env::temp_dir().join(format!("homopt-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |cfg: &RunConfig, tag: &str| {
        let path = dir.join(format!("{tag}.json"));
        std::fs::write(&path, cfg.to_json()).unwrap();
        Command::new(env!("CARGO_BIN_EXE_homopt"))
            .args(["verify", "--seed", "42", "--config"])
            .arg(&path)
            .arg("--out")
            .arg(dir.join(tag))
            .output()
            .unwrap()
    };
    let clean = run(&RunConfig::default(), "clean");
    let an = params().an();
    let tampered = run(&RunConfig { an_override: Some(1.1 * an), ..RunConfig::default() }, "tampered");
    let named = String::from_utf8_lossy(&tampered.stderr).contains("capacity constant")
        || String::from_utf8_lossy(&tampered.stderr).contains("fp identity");
    let _ = std::fs::remove_dir_all(&dir);
    let (a, b) = (clean.status.code(), tampered.status.code());
    outcome(a == Some(0) && b == Some(3) && named, format!("clean exit {a:?}, tampered An exit {b:?}, invariant named: {named}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, f64); 11] = [
        ("operator dualities", dualities, 1.0),
        ("composition identities", compositions, 1.0),
        ("two-point problems vs shooting", two_point_problems, 5.0),
        ("capacity constant", capacity, 1.0),
        ("manufactured solutions", manufactured, 60.0),
        ("dense-oracle equivalence", dense, 10.0),
        ("fp identity", fp_identity, 120.0),
        ("optimality cross-check", optimality_cross_check, 300.0),
        ("quadratic-form decompositions", decompositions, 10.0),
        ("gradient vs finite differences", gradient, 60.0),
        ("verify exit discipline", verify_exit_discipline, 600.0),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let o = run();
        let secs = clock.elapsed().as_secs_f64();
        let ok = o.passed && secs <= *budget;
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {:<32} {:>7.2}s (budget {:>5.0}s)  {}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            name,
            secs,
            budget,
            o.detail
        );
    }
    println!("acceptance: {} of 11 passed in {:.1}s", 11 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
