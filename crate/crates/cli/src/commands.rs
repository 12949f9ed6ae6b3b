//! The four subcommands. Each returns an [`Exit`] status and writes its
//! manifest exactly once.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use homopt_core::cost::{check_fp_identity, evaluate_j0, CostBreakdown};
use homopt_core::optimality::solve_optimality;
use homopt_core::state::{check_admissible, solve_state};
use homopt_core::{BoxRegion, Model, StateProblem};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig, OPTIMIZE_FIELDS, SOLVE_FIELDS};
use crate::export::{write_breakdown_csv, write_field, write_json, Derived, ReportRecord, RunManifest, SuiteRow};
use crate::suite::run_suite;

/// Process exit status. No other values are ever returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Config = 1,
    Solver = 2,
    Verify = 3,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

fn config_failure(e: &ConfigError) -> Exit {
    eprintln!("error: {e}");
    Exit::Config
}

fn io_failure(path: &Path, e: std::io::Error) -> Exit {
    eprintln!("error: cannot write {}: {e}", path.display());
    Exit::Config
}

fn derived(m: &Model) -> Derived {
    let p = m.params();
    Derived { an: p.an(), bn: p.bn(), mu: p.mu() }
}

fn prepare_dir(dir: &Path) -> Result<(), Exit> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

fn finish(dir: &Path, mut manifest: RunManifest, exit: Exit) -> Exit {
    manifest.exit_code = exit.code();
    let path = dir.join("manifest.json");
    match write_json(&path, &manifest) {
        Ok(()) => exit,
        Err(e) => io_failure(&path, e),
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Exit {
    let model = match cfg.model(SOLVE_FIELDS) {
        Ok(m) => m,
        Err(e) => return config_failure(&e),
    };
    let f = match cfg.source(&model) {
        Ok(f) => f,
        Err(e) => return config_failure(&e),
    };
    let v = cfg.control(&model);
    if let Err(e) = check_admissible(&model, &v) {
        return config_failure(&ConfigError::new("admissible control", e.to_string()));
    }
    if let Err(e) = prepare_dir(out) {
        return e;
    }
    let mut manifest = RunManifest::new("solve", cfg);
    manifest.derived = Some(derived(&model));
    let clock = Instant::now();
    let prob = match StateProblem::new(&model, &f, &v, cfg.solver_options()) {
        Ok(p) => p,
        Err(e) => return config_failure(&ConfigError::new("state problem", e.to_string())),
    };
    let (u, report) = match solve_state(&prob) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: state solve failed: {e}");
            return finish(out, manifest, Exit::Solver);
        }
    };
    manifest.timings.push(("solve_state".into(), clock.elapsed().as_secs_f64()));
    manifest.reports.push(ReportRecord::new("state", &report));
    let path = out.join("u0.csv");
    if let Err(e) = write_field(&path, &u) {
        return io_failure(&path, e);
    }
    manifest.files.push(path);
    let exit = if report.converged {
        Exit::Success
    } else {
        eprintln!("error: state solve stopped at residual {:e} after {} iterations", report.final_residual, report.iterations);
        Exit::Solver
    };
    finish(out, manifest, exit)
}

#[derive(Debug, Clone, Serialize)]
pub struct FpIdentity {
    pub j0: f64,
    pub integral_fp: f64,
    pub relative_gap: f64,
}

/// Summary of one optimization, as aggregated by `sweep`.
#[derive(Debug, Clone)]
pub struct PointSummary {
    pub breakdown: CostBreakdown,
    pub fp: FpIdentity,
    pub outer_iterations: usize,
}

fn relative_gap(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        lhs.abs()
    } else {
        (lhs - rhs).abs() / rhs.abs()
    }
}

pub fn cmd_optimize(cfg: &RunConfig, out: &Path) -> Exit {
    optimize(cfg, out, "optimize").0
}

fn optimize(cfg: &RunConfig, out: &Path, command: &str) -> (Exit, Option<PointSummary>) {
    let model = match cfg.model(OPTIMIZE_FIELDS) {
        Ok(m) => m,
        Err(e) => return (config_failure(&e), None),
    };
    let f = match cfg.source(&model) {
        Ok(f) => f,
        Err(e) => return (config_failure(&e), None),
    };
    if let Err(e) = prepare_dir(out) {
        return (e, None);
    }
    let mut manifest = RunManifest::new(command, cfg);
    manifest.derived = Some(derived(&model));
    let clock = Instant::now();
    let r = match solve_optimality(&model, &f, cfg.optimality_options()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: optimality solve failed: {e}");
            return (finish(out, manifest, Exit::Solver), None);
        }
    };
    manifest.timings.push(("solve_optimality".into(), clock.elapsed().as_secs_f64()));
    for (i, rep) in r.state_reports.iter().enumerate() {
        manifest.reports.push(ReportRecord::new(format!("state[{i}]"), rep));
    }
    for (i, rep) in r.adjoint_reports.iter().enumerate() {
        manifest.reports.push(ReportRecord::new(format!("adjoint[{i}]"), rep));
    }
    for (name, field) in [("u0.csv", &r.u0), ("p0.csv", &r.p0), ("v0.csv", &r.v0)] {
        let path = out.join(name);
        if let Err(e) = write_field(&path, field) {
            return (io_failure(&path, e), None);
        }
        manifest.files.push(path);
    }
    let clock = Instant::now();
    let (breakdown, (lhs, rhs)) = match (evaluate_j0(&model, &r.v0, &r.u0), check_fp_identity(&model, &f, &r)) {
        (Ok(b), Ok(pair)) => (b, pair),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: cost evaluation failed: {e}");
            return (finish(out, manifest, Exit::Solver), None);
        }
    };
    manifest.timings.push(("cost".into(), clock.elapsed().as_secs_f64()));
    let fp = FpIdentity { j0: lhs, integral_fp: rhs, relative_gap: relative_gap(lhs, rhs) };
    let mut doc: serde_json::Map<String, serde_json::Value> =
        breakdown.named_terms().map(|(k, v)| (k.to_string(), v.into())).collect();
    doc.insert("total".into(), breakdown.total.into());
    for (name, value) in [("breakdown.json", serde_json::to_value(&doc)), ("fp_identity.json", serde_json::to_value(&fp))] {
        let path = out.join(name);
        if let Err(e) = write_json(&path, &value.expect("serializable")) {
            return (io_failure(&path, e), None);
        }
        manifest.files.push(path);
    }
    let path = out.join("breakdown.csv");
    if let Err(e) = write_breakdown_csv(&path, &breakdown) {
        return (io_failure(&path, e), None);
    }
    manifest.files.push(path);
    manifest.extra = Some(serde_json::json!({
        "outer_iterations": r.outer_iterations,
        "outer_residual": r.outer_residual,
        "converged": r.converged,
        "fp_identity": &fp,
    }));
    let exit = if r.converged {
        Exit::Success
    } else {
        eprintln!("error: optimality iteration stopped at residual {:e}", r.outer_residual);
        Exit::Solver
    };
    let summary = PointSummary { breakdown, fp, outer_iterations: r.outer_iterations };
    (finish(out, manifest, exit), Some(summary))
}

/// Formats the pass/fail table. Contains no timings, so equal seeds give
/// identical text.
pub fn format_table(rows: &[SuiteRow]) -> String {
    let width = rows.iter().map(|r| r.invariant.len()).max().unwrap_or(9).max(9);
    let mut s = format!("{:<width$}  {:>12}  {:>10}  result\n", "invariant", "measured", "allowed");
    for r in rows {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        s.push_str(&format!("{:<width$}  {:>12.4e}  {:>10}  {verdict}\n", r.invariant, r.measured, r.bound));
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    s.push_str(&format!("{} invariants, {} passed, {} failed\n", rows.len(), rows.len() - failed, failed));
    s
}

pub fn cmd_verify(cfg: &RunConfig, seed: u64, out: &Path) -> Exit {
    let clock = Instant::now();
    let checks = match run_suite(cfg, seed) {
        Ok(c) => c,
        Err(e) => return config_failure(&e),
    };
    let rows: Vec<SuiteRow> = checks
        .iter()
        .map(|c| SuiteRow { invariant: c.name.clone(), measured: c.measured, bound: c.bound.to_string(), passed: c.passed() })
        .collect();
    print!("{}", format_table(&rows));
    for r in rows.iter().filter(|r| !r.passed) {
        eprintln!("FAILED: {} measured {:e}, allowed {}", r.invariant, r.measured, r.bound);
    }
    let exit = if rows.iter().all(|r| r.passed) { Exit::Success } else { Exit::Verify };
    if let Err(e) = prepare_dir(out) {
        return e;
    }
    let mut manifest = RunManifest::new("verify", cfg);
    manifest.seed = Some(seed);
    if let Ok(p) = cfg.params() {
        manifest.derived = Some(Derived { an: p.an(), bn: p.bn(), mu: p.mu() });
    }
    manifest.timings.push(("suite".into(), clock.elapsed().as_secs_f64()));
    manifest.suite = rows;
    finish(out, manifest, exit)
}

/// Parameters that `sweep` can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    #[value(name = "N")]
    N,
    #[value(name = "C0")]
    C0,
    #[value(name = "omega_size")]
    OmegaSize,
    #[value(name = "nt")]
    Nt,
    #[value(name = "h")]
    H,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::N => "N",
            Axis::C0 => "C0",
            Axis::OmegaSize => "omega_size",
            Axis::Nt => "nt",
            Axis::H => "h",
        }
    }

    /// The base config with this axis set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig, ConfigError> {
        let mut c = base.clone();
        let whole = |v: f64, name: &'static str| {
            if v.is_finite() && v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(ConfigError::new(name, format!("sweep value {v} is not a positive integer")))
            }
        };
        match self {
            Axis::N => c.control_cost = value,
            Axis::C0 => c.c0 = value,
            Axis::Nt => c.nt = whole(value, "nt")?,
            Axis::OmegaSize => {
                // side length of omega, kept centered
                let omega = BoxRegion::new(&base.omega_lo, &base.omega_hi)
                    .map_err(|e| ConfigError::new("omega", e.to_string()))?;
                for i in 0..base.sim_dim {
                    let mid = 0.5 * (omega.lo[i] + omega.hi[i]);
                    c.omega_lo[i] = mid - 0.5 * value;
                    c.omega_hi[i] = mid + 0.5 * value;
                }
            }
            Axis::H => {
                if !(value > 0.0) {
                    return Err(ConfigError::new("h", format!("spacing must be positive, got {value}")));
                }
                for i in 0..base.sim_dim {
                    let len = base.domain_hi[i] - base.domain_lo[i];
                    c.nodes[i] = (len / value).round() as usize + 1;
                }
            }
        }
        c.model(OPTIMIZE_FIELDS)?;
        Ok(c)
    }
}

pub fn cmd_sweep(cfg: &RunConfig, axis: Axis, values: &[f64], workers: usize, out: &Path) -> Exit {
    if values.len() < 2 {
        return config_failure(&ConfigError::new("sweep values", format!("need at least 2 values, got {}", values.len())));
    }
    if cfg.nodes.len() != cfg.sim_dim || cfg.omega_lo.len() != cfg.sim_dim {
        return config_failure(&ConfigError::new("nodes", "per-axis entries must match sim_dim"));
    }
    let mut points = Vec::with_capacity(values.len());
    for &v in values {
        match axis.apply(cfg, v) {
            Ok(c) => points.push(c),
            Err(e) => return config_failure(&e),
        }
    }
    if let Err(e) = prepare_dir(out) {
        return e;
    }
    let dirs: Vec<PathBuf> = (0..points.len()).map(|i| out.join(format!("point_{i:03}"))).collect();
    let results: Vec<Mutex<Option<(Exit, Option<PointSummary>)>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let clock = Instant::now();
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, points.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let r = optimize(&points[i], &dirs[i], "sweep-point");
                *results[i].lock().expect("no poisoning") = Some(r);
            });
        }
    });
    let results: Vec<(Exit, Option<PointSummary>)> =
        results.into_iter().map(|m| m.into_inner().expect("no poisoning").expect("every point ran")).collect();

    let path = out.join("sweep.csv");
    let written = (|| -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec![axis.name().to_string()];
        header.extend(CostBreakdown::NAMES.iter().map(|s| s.to_string()));
        header.extend(["total", "fp_gap", "iterations", "status"].map(String::from));
        w.write_record(&header)?;
        for (v, (exit, summary)) in values.iter().zip(&results) {
            let mut row = vec![v.to_string()];
            match summary {
                Some(s) => {
                    row.extend(s.breakdown.terms().iter().map(|t| t.to_string()));
                    row.push(s.breakdown.total.to_string());
                    row.push(s.fp.relative_gap.to_string());
                    row.push(s.outer_iterations.to_string());
                }
                None => row.extend((0..CostBreakdown::NAMES.len() + 3).map(|_| "NaN".to_string())),
            }
            row.push(if *exit == Exit::Success { "ok" } else { "failed" }.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    })();
    if let Err(e) = written {
        eprintln!("error: cannot write {}: {e}", path.display());
        return Exit::Config;
    }
    let mut manifest = RunManifest::new("sweep", cfg);
    manifest.timings.push(("points".into(), clock.elapsed().as_secs_f64()));
    manifest.files.push(path);
    manifest.files.extend(dirs);
    manifest.extra = Some(serde_json::json!({ "axis": axis.name(), "values": values, "workers": workers }));
    let failed = results.iter().filter(|(e, _)| *e != Exit::Success).count();
    let exit = if failed == 0 {
        Exit::Success
    } else {
        eprintln!("error: {failed} of {} sweep points failed", values.len());
        Exit::Solver
    };
    finish(out, manifest, exit)
}
