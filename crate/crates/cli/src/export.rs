//! File formats: field CSVs, JSON documents and the run manifest.
//!
//! Field CSVs have the header `x[,y[,z]],t,value` on line 1 followed by one
//! row per (node, time) pair, node-major. Numbers use the shortest
//! representation that round-trips, so repeated runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use homopt_core::cost::CostBreakdown;
use homopt_core::{Model, SolveReport, SpaceTimeField, TimeGrid, TimeSeries};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};

const AXES: [&str; 3] = ["x", "y", "z"];

pub fn field_header(dim: usize) -> Vec<&'static str> {
    let mut h: Vec<&str> = AXES[..dim].to_vec();
    h.push("t");
    h.push("value");
    h
}

pub fn write_field(path: &Path, field: &SpaceTimeField) -> std::io::Result<()> {
    let grid = field.grid();
    let tgrid = field.tgrid();
    let dim = grid.dim();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(field_header(dim))?;
    let mut row: Vec<String> = Vec::with_capacity(dim + 2);
    for q in 0..grid.num_nodes() {
        let x = grid.coords(q);
        for (k, v) in field.series(q).iter().enumerate() {
            row.clear();
            row.extend(x[..dim].iter().map(|c| c.to_string()));
            row.push(tgrid.node(k).to_string());
            row.push(v.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()
}

/// Reads a field in the layout written by [`write_field`]. Coordinates must
/// match the model grid.
pub fn read_field(path: &Path, model: &Model) -> Result<SpaceTimeField, ConfigError> {
    let bad = |d: String| ConfigError::new("f_csv", d);
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    let dim = model.grid().dim();
    let expected = field_header(dim);
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(bad(format!("header must be `{}`", expected.join(","))));
    }
    let nk = model.tgrid().len();
    let total = model.grid().num_nodes() * nk;
    let mut values = Vec::with_capacity(total);
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if i >= total {
            return Err(bad(format!("more than {total} rows")));
        }
        let nums: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        let (q, k) = (i / nk, i % nk);
        let x = model.grid().coords(q);
        let t = model.tgrid().node(k);
        let off = (0..dim).map(|a| (nums[a] - x[a]).abs()).fold((nums[dim] - t).abs(), f64::max);
        if off > 1e-9 {
            return Err(bad(format!("row {} does not sit on the grid node {:?}, t = {t}", i + 2, &x[..dim])));
        }
        values.push(nums[dim + 1]);
    }
    if values.len() != total {
        return Err(bad(format!("expected {total} rows, found {}", values.len())));
    }
    SpaceTimeField::from_values(*model.grid(), *model.tgrid(), values).map_err(|e| bad(e.to_string()))
}

/// One time series as `t,value` rows.
pub fn write_series(path: &Path, series: &TimeSeries) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "value"])?;
    for (k, v) in series.values().iter().enumerate() {
        w.write_record([series.grid().node(k).to_string(), v.to_string()])?;
    }
    w.flush()
}

pub fn read_series(path: &Path, grid: TimeGrid) -> Result<TimeSeries, ConfigError> {
    let bad = |d: String| ConfigError::new("series csv", d);
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    if r.headers().map_err(|e| bad(e.to_string()))?.iter().collect::<Vec<_>>() != ["t", "value"] {
        return Err(bad("header must be `t,value`".into()));
    }
    let mut values = Vec::with_capacity(grid.len());
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| rec.get(i).unwrap_or("").trim().parse::<f64>().map_err(|e| bad(format!("row {}: {e}", k + 2)));
        let (t, v) = (parse(0)?, parse(1)?);
        if k >= grid.len() || (t - grid.node(k)).abs() > 1e-9 {
            return Err(bad(format!("row {} is not time node {k}", k + 2)));
        }
        values.push(v);
    }
    TimeSeries::new(grid, values).map_err(|e| bad(e.to_string()))
}

/// Cost breakdown as a one-row CSV, columns in term order then `total`.
pub fn write_breakdown_csv(path: &Path, b: &CostBreakdown) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = CostBreakdown::NAMES.to_vec();
    header.push("total");
    w.write_record(header)?;
    let mut row: Vec<String> = b.terms().iter().map(|t| t.to_string()).collect();
    row.push(b.total.to_string());
    w.write_record(row)?;
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    fs::write(path, text)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportRecord {
    pub stage: String,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub relaxation: f64,
    pub cg_iterations: usize,
}

impl ReportRecord {
    pub fn new(stage: impl Into<String>, r: &SolveReport) -> Self {
        ReportRecord {
            stage: stage.into(),
            iterations: r.iterations,
            final_residual: r.final_residual,
            converged: r.converged,
            relaxation: r.relaxation,
            cg_iterations: r.cg_iterations,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Derived {
    pub an: f64,
    pub bn: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteRow {
    pub invariant: String,
    pub measured: f64,
    pub bound: String,
    pub passed: bool,
}

/// Run manifest, written once at the end of each command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub exit_code: i32,
    pub seed: Option<u64>,
    pub config: RunConfig,
    pub derived: Option<Derived>,
    pub reports: Vec<ReportRecord>,
    pub files: Vec<PathBuf>,
    pub timings: Vec<(String, f64)>,
    pub suite: Vec<SuiteRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            command: command.to_string(),
            exit_code: 0,
            seed: None,
            config: config.clone(),
            derived: None,
            reports: Vec::new(),
            files: Vec::new(),
            timings: Vec::new(),
            suite: Vec::new(),
            extra: None,
        }
    }
}
