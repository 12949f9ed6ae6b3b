use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use homopt::config::RunConfig;

fn homopt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_homopt")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn small() -> &'static str {
    r#"{"nodes": [17], "nt": 32}"#
}

#[test]
fn zero_source_solves_to_zero() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"nodes": [17], "nt": 32, "f_amplitude": 0.0}"#);
    let o = homopt(&["solve", "--config", &cfg, "--out", "run"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(d.path().join("run/u0.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,t,value"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 17 * 33);
    assert!(rows.iter().all(|r| r.ends_with(",0")));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("run/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["reports"][0]["converged"], true);
}

#[test]
fn omega_outside_domain_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"omega_lo": [0.5], "omega_hi": [1.5]}"#);
    let o = homopt(&["solve", "--config", &cfg, "--out", "run"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("omega inside domain"));
    assert!(!d.path().join("run").exists());
}

#[test]
fn oversize_grid_is_rejected_before_solving() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"nodes": [20001], "nt": 4000, "memory_cap_mb": 16}"#);
    for cmd in ["solve", "optimize"] {
        let o = homopt(&[cmd, "--config", &cfg, "--out", "run"], d.path());
        assert_eq!(o.status.code(), Some(1));
        assert!(String::from_utf8_lossy(&o.stderr).contains("memory cap"));
    }
    assert!(!d.path().join("run").exists());
}

#[test]
fn malformed_documents_and_flags_exit_with_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "{ not json");
    assert_eq!(homopt(&["solve", "--config", &cfg], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["solve", "--config", "missing.json"], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["launch"], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["verify", "--seed", "minus-one"], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["--help"], d.path()).status.code(), Some(0));
}

#[test]
fn non_convergence_exits_with_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"nodes": [17], "nt": 32, "max_iter": 1, "tol": 1e-14}"#);
    assert_eq!(homopt(&["solve", "--config", &cfg, "--out", "run"], d.path()).status.code(), Some(2));
    let cfg = write_config(d.path(), r#"{"nodes": [17], "nt": 32, "outer_max": 1}"#);
    assert_eq!(homopt(&["optimize", "--config", &cfg, "--out", "run2"], d.path()).status.code(), Some(2));
}

#[test]
fn optimize_of_zero_source_has_zero_cost() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"nodes": [17], "nt": 32, "f_amplitude": 0.0}"#);
    let o = homopt(&["optimize", "--config", &cfg, "--out", "run"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let b: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("run/breakdown.json")).unwrap()).unwrap();
    assert_eq!(b["total"], 0.0);
}

#[test]
fn default_optimize_records_a_small_fp_gap() {
    let d = tempfile::tempdir().unwrap();
    let o = homopt(&["optimize", "--out", "run"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("run/manifest.json")).unwrap()).unwrap();
    let gap = m["extra"]["fp_identity"]["relative_gap"].as_f64().unwrap();
    assert!(gap <= 1e-3, "{gap}");
    for f in ["u0.csv", "p0.csv", "v0.csv", "breakdown.json", "fp_identity.json"] {
        assert!(d.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn optimize_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"nodes": [17], "nt": 32, "f": "gaussian-bump", "f_width": 0.2}"#);
    for run in ["a", "b"] {
        assert_eq!(homopt(&["optimize", "--config", &cfg, "--out", run], d.path()).status.code(), Some(0));
    }
    for f in ["u0.csv", "p0.csv", "v0.csv", "breakdown.json", "breakdown.csv"] {
        assert_eq!(fs::read(d.path().join("a").join(f)).unwrap(), fs::read(d.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn csv_source_round_trips_through_the_field_format() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"nodes": [9], "nt": 8, "f": "sine-product"}"#);
    assert_eq!(homopt(&["optimize", "--config", &cfg, "--out", "a"], d.path()).status.code(), Some(0));
    // feed the exported state back as a source
    let cfg2 = write_config(d.path(), r#"{"nodes": [9], "nt": 8, "f": "csv", "f_csv": "a/u0.csv"}"#);
    assert_eq!(homopt(&["solve", "--config", &cfg2, "--out", "b"], d.path()).status.code(), Some(0));
    let bad = write_config(d.path(), r#"{"nodes": [9], "nt": 16, "f": "csv", "f_csv": "a/u0.csv"}"#);
    let o = homopt(&["solve", "--config", &bad, "--out", "c"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("f_csv"));
}

#[test]
fn verify_tables_are_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let a = homopt(&["verify", "--seed", "7", "--out", "a"], d.path());
    let b = homopt(&["verify", "--seed", "7", "--out", "b"], d.path());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8_lossy(&a.stdout);
    let rows = text.lines().filter(|l| l.ends_with("PASS")).count();
    assert!(rows >= 15, "{rows}");
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    assert_eq!(m["suite"].as_array().unwrap().len(), rows);
}

#[test]
fn sweep_over_nt_refines_the_fp_gap() {
    let d = tempfile::tempdir().unwrap();
    let o = homopt(&["sweep", "--axis", "nt", "--values", "32,64,128", "--workers", "3", "--out", "s"], d.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(d.path().join("s/sweep.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let col = h.iter().position(|c| c == "fp_gap").unwrap();
    let gaps: Vec<f64> = r.records().map(|x| x.unwrap()[col].parse().unwrap()).collect();
    assert_eq!(gaps.len(), 3);
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    for i in 0..3 {
        assert!(d.path().join(format!("s/point_{i:03}/manifest.json")).exists());
    }
}

#[test]
fn sweep_over_n_scales_the_control_terms() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), small());
    let o = homopt(&["sweep", "--config", &cfg, "--axis", "N", "--values", "1,10", "--out", "s"], d.path());
    assert_eq!(o.status.code(), Some(0));
    let mut r = csv::Reader::from_path(d.path().join("s/sweep.csv")).unwrap();
    assert_eq!(&r.headers().unwrap()[0], "N");
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    // every point reproduces its own breakdown, and the dv term carries N
    for (row, n) in rows.iter().zip(["1", "10"]) {
        assert_eq!(&row[0], n);
        let b: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.path().join(format!(
            "s/point_{:03}/breakdown.json",
            if n == "1" { 0 } else { 1 }
        ))).unwrap())
        .unwrap();
        assert_eq!(row[8].parse::<f64>().unwrap(), b["dv_term"].as_f64().unwrap());
        assert_eq!(&row[row.len() - 1], "ok");
    }
}

#[test]
fn sweep_validation() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(homopt(&["sweep", "--axis", "nt", "--values", "--out", "s"], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["sweep", "--axis", "nt", "--values", "64", "--out", "s"], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["sweep", "--axis", "nt", "--values", "64,1.5"], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["sweep", "--axis", "omega_size", "--values", "0.5,2.0"], d.path()).status.code(), Some(1));
    assert_eq!(homopt(&["sweep", "--axis", "eps", "--values", "1,2"], d.path()).status.code(), Some(1));
}

#[test]
fn failed_sweep_points_exit_with_two() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), r#"{"nodes": [17], "nt": 32, "outer_max": 1}"#);
    let o = homopt(&["sweep", "--config", &cfg, "--axis", "C0", "--values", "1,2", "--out", "s"], d.path());
    assert_eq!(o.status.code(), Some(2));
    let text = fs::read_to_string(d.path().join("s/sweep.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with("failed")));
}

#[test]
fn config_round_trip_is_exact() {
    let c = RunConfig::from_json(r#"{"c0": 0.7, "nodes": [33], "f": "sine-product", "f_frequency": 2.0}"#).unwrap();
    let again = RunConfig::from_json(&c.to_json()).unwrap();
    assert_eq!(c, again);
    assert_eq!(c.to_json(), again.to_json());
}
