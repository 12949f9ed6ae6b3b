//! Run configuration: one flat JSON document.
//!
//! Every key has a default, so `{}` is a valid config describing the
//! desk-scale 1-D problem (n = 3, C0 = 1, N = 1, T = 1, Ω = (0,1),
//! ω = (0.25, 0.75), 65 nodes, 128 steps, f ≡ 1).

use std::fmt;
use std::path::{Path, PathBuf};

use homopt_core::optimality::OptimalityOptions;
use homopt_core::{make_params, BoxRegion, Model, ModelParams, Region, SolverOptions, SpaceTimeField};
use serde::{Deserialize, Serialize};

/// Analytic source presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourcePreset {
    /// `f = amplitude`
    Constant,
    /// `f = amplitude * prod_i sin(frequency * pi * (x_i - lo_i) / (hi_i - lo_i))`
    SineProduct,
    /// `f = amplitude * exp(-|x - center|^2 / (2 width^2))`
    GaussianBump,
    /// Node values read from `f_csv`.
    Csv,
}

/// Control used by `solve`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlPreset {
    Zero,
    /// `v = v_amplitude * t` on the control nodes.
    Ramp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: u32,
    pub c0: f64,
    pub control_cost: f64,
    pub horizon: f64,
    pub sim_dim: usize,
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    pub omega_lo: Vec<f64>,
    pub omega_hi: Vec<f64>,
    /// Nodes per axis, boundary included.
    pub nodes: Vec<usize>,
    pub nt: usize,

    pub f: SourcePreset,
    pub f_amplitude: f64,
    pub f_frequency: f64,
    /// Defaults to the domain center.
    pub f_center: Option<Vec<f64>>,
    pub f_width: f64,
    pub f_csv: Option<PathBuf>,

    pub v: ControlPreset,
    pub v_amplitude: f64,

    /// Picard tolerance of each state or adjoint solve.
    pub tol: f64,
    pub max_iter: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max: usize,

    pub output_dir: PathBuf,
    pub memory_cap_mb: f64,
    /// Replaces the capacity constant, bypassing its consistency check.
    pub an_override: Option<f64>,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: 3,
            c0: 1.0,
            control_cost: 1.0,
            horizon: 1.0,
            sim_dim: 1,
            domain_lo: vec![0.0],
            domain_hi: vec![1.0],
            omega_lo: vec![0.25],
            omega_hi: vec![0.75],
            nodes: vec![65],
            nt: 128,
            f: SourcePreset::Constant,
            f_amplitude: 1.0,
            f_frequency: 1.0,
            f_center: None,
            f_width: 0.1,
            f_csv: None,
            v: ControlPreset::Zero,
            v_amplitude: 0.0,
            tol: 1e-10,
            max_iter: 200,
            cg_tol: 1e-12,
            cg_max_iter: 2000,
            outer_tol: 1e-9,
            outer_max: 100,
            output_dir: PathBuf::from("out"),
            memory_cap_mb: 1024.0,
            an_override: None,
            seed: 42,
        }
    }
}

/// A configuration problem. `invariant` names the violated rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub invariant: &'static str,
    pub detail: String,
}

impl ConfigError {
    pub fn new(invariant: &'static str, detail: impl Into<String>) -> Self {
        ConfigError { invariant, detail: detail.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config invariant `{}` violated: {}", self.invariant, self.detail)
    }
}

impl std::error::Error for ConfigError {}

/// Persistent space-time fields held by each command.
pub const SOLVE_FIELDS: usize = 4;
pub const OPTIMIZE_FIELDS: usize = 8;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::new("json", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("readable", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Model parameters, with `an_override` applied.
    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        let d = self.sim_dim;
        if !(1..=3).contains(&d) {
            return Err(ConfigError::new("sim_dim", format!("must be 1, 2 or 3, got {d}")));
        }
        for (name, v) in [
            ("domain_lo", &self.domain_lo),
            ("domain_hi", &self.domain_hi),
            ("omega_lo", &self.omega_lo),
            ("omega_hi", &self.omega_hi),
        ] {
            if v.len() != d {
                return Err(ConfigError::new(name, format!("needs {d} entries, got {}", v.len())));
            }
        }
        let domain = BoxRegion::new(&self.domain_lo, &self.domain_hi)
            .map_err(|e| ConfigError::new("domain", e.to_string()))?;
        let omega = BoxRegion::new(&self.omega_lo, &self.omega_hi)
            .map_err(|e| ConfigError::new("omega", e.to_string()))?;
        if !omega.strictly_inside(&domain, d) {
            return Err(ConfigError::new(
                "omega inside domain",
                "the closure of omega must lie strictly inside the domain",
            ));
        }
        let prm = make_params(self.n, self.c0, self.control_cost, self.horizon, d, domain, omega)
            .map_err(|e| ConfigError::new("model parameters", e.to_string()))?;
        Ok(match self.an_override {
            Some(an) if an.is_finite() && an > 0.0 => prm.with_an_override(an),
            Some(an) => return Err(ConfigError::new("an_override", format!("must be positive, got {an}"))),
            None => prm,
        })
    }

    pub fn memory_estimate(&self, fields: usize) -> f64 {
        let nodes: f64 = self.nodes.iter().map(|&n| n as f64).product();
        nodes * (self.nt as f64 + 1.0) * fields as f64 * 8.0
    }

    /// Full validation: parameters, grid minimums and the memory cap for a
    /// command holding `fields` space-time fields. No solver work happens here.
    pub fn model(&self, fields: usize) -> Result<Model, ConfigError> {
        let prm = self.params()?;
        if self.nodes.len() != self.sim_dim {
            return Err(ConfigError::new("nodes", format!("needs {} entries, got {}", self.sim_dim, self.nodes.len())));
        }
        if self.nodes.iter().any(|&n| n < 3) {
            return Err(ConfigError::new("nodes", "each axis needs at least 3 nodes"));
        }
        if self.nt < 2 {
            return Err(ConfigError::new("nt", "need at least 2 time steps"));
        }
        if !(self.memory_cap_mb > 0.0) {
            return Err(ConfigError::new("memory_cap_mb", "must be positive"));
        }
        let bytes = self.memory_estimate(fields);
        let cap = self.memory_cap_mb * 1024.0 * 1024.0;
        if bytes > cap {
            return Err(ConfigError::new(
                "memory cap",
                format!("estimated {:.1} MB exceeds the cap of {} MB", bytes / 1048576.0, self.memory_cap_mb),
            ));
        }
        for (name, v) in [("tol", self.tol), ("cg_tol", self.cg_tol), ("outer_tol", self.outer_tol)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::new(name, format!("must be positive, got {v}")));
            }
        }
        let model = Model::new(prm, &self.nodes, self.nt).map_err(|e| ConfigError::new("grid", e.to_string()))?;
        if model.mask().count() == 0 {
            return Err(ConfigError::new("omega resolved", "no grid node falls inside omega"));
        }
        Ok(model)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            cg_tol: self.cg_tol,
            cg_max_iter: self.cg_max_iter,
            ..SolverOptions::default()
        }
    }

    pub fn optimality_options(&self) -> OptimalityOptions {
        OptimalityOptions {
            inner: self.solver_options(),
            outer_tol: self.outer_tol,
            outer_max: self.outer_max,
            ..OptimalityOptions::default()
        }
    }

    /// The source field on the model grid.
    pub fn source(&self, model: &Model) -> Result<SpaceTimeField, ConfigError> {
        let a = self.f_amplitude;
        let (lo, hi) = (self.domain_lo.clone(), self.domain_hi.clone());
        let d = self.sim_dim;
        Ok(match self.f {
            SourcePreset::Constant => model.field_from_fn(|_, _| a),
            SourcePreset::SineProduct => {
                let k = self.f_frequency * std::f64::consts::PI;
                model.field_from_fn(|x, _| a * (0..d).map(|i| (k * (x[i] - lo[i]) / (hi[i] - lo[i])).sin()).product::<f64>())
            }
            SourcePreset::GaussianBump => {
                let center = match &self.f_center {
                    Some(c) if c.len() == d => c.clone(),
                    Some(c) => return Err(ConfigError::new("f_center", format!("needs {d} entries, got {}", c.len()))),
                    None => (0..d).map(|i| 0.5 * (lo[i] + hi[i])).collect(),
                };
                if !(self.f_width > 0.0) {
                    return Err(ConfigError::new("f_width", "must be positive"));
                }
                let s2 = 2.0 * self.f_width * self.f_width;
                model.field_from_fn(|x, _| {
                    let r2: f64 = (0..d).map(|i| (x[i] - center[i]).powi(2)).sum();
                    a * (-r2 / s2).exp()
                })
            }
            SourcePreset::Csv => {
                let path = self.f_csv.as_ref().ok_or_else(|| ConfigError::new("f_csv", "preset `csv` needs a path"))?;
                crate::export::read_field(path, model)?
            }
        })
    }

    /// The control for `solve`.
    pub fn control(&self, model: &Model) -> SpaceTimeField {
        match self.v {
            ControlPreset::Zero => model.zeros(),
            ControlPreset::Ramp => {
                let a = self.v_amplitude;
                model.field_from_fn(|_, t| a * t).restricted(model.mask(), Region::Omega)
            }
        }
    }
}
