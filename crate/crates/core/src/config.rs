//! Run configuration in TOML.
//!
//! ```toml
//! problem = "kdv_manufactured"
//! k = 2
//! t_final = 0.1
//!
//! [grid]
//! kind = "adaptive"   # full | sparse | adaptive
//! n = 8
//! epsilon = 1e-3
//! ```

use crate::adapt::MAX_LEVEL_CAP;
use crate::driver::{Grid, RateMode, Scheme};
use crate::error::{Error, Result};
use crate::kdv::FluxVariant1D;
use crate::problems::{problem_library, ProblemSpec};
use crate::projection::ProjMethod;
use crate::solver::SolveMethod;
use crate::zk::FluxVariant2D;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKindConfig {
    Full,
    Sparse,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct GridConfig {
    pub kind: GridKindConfig,
    /// Mesh level (full, sparse) or level cap (adaptive).
    pub n: u8,
    /// Refinement threshold, adaptive grids only.
    pub epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default, Deserialize, Serialize)]
pub struct SchemeConfig {
    /// Hermite interpolation degree; 3 for k <= 2 and 5 for k = 3 by default.
    pub m: Option<usize>,
    #[serde(default)]
    pub flux_1d: FluxVariant1D,
    #[serde(default)]
    pub flux_2d: FluxVariant2D,
    #[serde(default)]
    pub solver: SolveMethod,
    #[serde(default)]
    pub projection: ProjMethod,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct TimeConfig {
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub dt: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { cfl: default_cfl(), dt: None }
    }
}

fn default_cfl() -> f64 {
    0.01
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct OutputConfig {
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    /// Sample points per finest cell and dimension in samples.dat.
    #[serde(default = "default_samples")]
    pub samples_per_cell: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { snapshots: default_snapshots(), samples_per_cell: default_samples() }
    }
}

fn default_snapshots() -> usize {
    10
}

fn default_samples() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct SweepConfig {
    /// Mesh levels (full, sparse) or thresholds (adaptive).
    pub values: Vec<f64>,
    #[serde(default)]
    pub rate: RateMode,
}

#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
pub struct RunConfig {
    pub problem: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub k: usize,
    pub t_final: f64,
    pub grid: GridConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub sweep: Option<SweepConfig>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("", &["problem", "params", "k", "t_final", "grid", "scheme", "time", "output", "sweep"]),
    ("grid", &["kind", "n", "epsilon"]),
    ("scheme", &["m", "flux_1d", "flux_2d", "solver", "projection"]),
    ("time", &["cfl", "dt"]),
    ("output", &["snapshots", "samples_per_cell"]),
    ("sweep", &["values", "rate"]),
];

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (section, known) in SECTIONS {
        let t = if section.is_empty() {
            Some(table)
        } else {
            table.get(*section).and_then(|v| v.as_table())
        };
        let Some(t) = t else { continue };
        for key in t.keys() {
            if !known.contains(&key.as_str()) {
                out.push(if section.is_empty() { key.clone() } else { format!("{section}.{key}") });
            }
        }
    }
    out
}

impl RunConfig {
    /// Parses and validates; every offending key is listed in the error.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let unknown = unknown_keys(&table);
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e| Error::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let problem = match self.problem_spec() {
            Ok(p) => Some(p),
            Err(e) => {
                bad.push(format!("problem/params: {e}"));
                None
            }
        };
        if let Some(p) = &problem {
            let kmin = p.equation.min_degree();
            if self.k < kmin {
                bad.push(format!("k: {} needs k >= {kmin}", p.name));
            }
        }
        if self.k > 3 {
            bad.push("k: degrees above 3 are not supported".into());
        }
        if let Some(m) = self.scheme.m {
            if m < self.k + 1 || m % 2 == 0 {
                bad.push(format!("scheme.m: must be odd and >= k+1, got {m}"));
            }
        }
        if !(self.t_final > 0.0) {
            bad.push("t_final: must be positive".into());
        }
        if self.grid.n > MAX_LEVEL_CAP {
            bad.push(format!("grid.n: at most {MAX_LEVEL_CAP}"));
        }
        match (self.grid.kind, self.grid.epsilon) {
            (GridKindConfig::Adaptive, None) => bad.push("grid.epsilon: required for adaptive grids".into()),
            (GridKindConfig::Adaptive, Some(e)) if !(e > 0.0) => bad.push("grid.epsilon: must be positive".into()),
            (GridKindConfig::Full | GridKindConfig::Sparse, Some(_)) => bad.push("grid.epsilon: only used by adaptive grids".into()),
            _ => {}
        }
        if !(self.time.cfl > 0.0) {
            bad.push("time.cfl: must be positive".into());
        }
        if let Some(dt) = self.time.dt {
            if !(dt > 0.0) {
                bad.push("time.dt: must be positive".into());
            }
        }
        if self.output.snapshots == 0 {
            bad.push("output.snapshots: at least 1".into());
        }
        if self.output.samples_per_cell == 0 {
            bad.push("output.samples_per_cell: at least 1".into());
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                bad.push("sweep.values: empty".into());
            }
            for v in &s.values {
                let ok = match self.grid.kind {
                    GridKindConfig::Adaptive => *v > 0.0,
                    _ => v.fract() == 0.0 && *v >= 0.0 && *v <= MAX_LEVEL_CAP as f64,
                };
                if !ok {
                    bad.push(format!("sweep.values: invalid entry {v}"));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid configuration: {}", bad.join("; "))))
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let params: Vec<(String, f64)> = self.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
        problem_library(&self.problem, &params)
    }

    pub fn grid(&self) -> Grid {
        match self.grid.kind {
            GridKindConfig::Full => Grid::Full(self.grid.n),
            GridKindConfig::Sparse => Grid::Sparse(self.grid.n),
            GridKindConfig::Adaptive => Grid::Adaptive { epsilon: self.grid.epsilon.unwrap_or(1e-4), max_level: self.grid.n },
        }
    }

    /// The same configuration with the swept parameter set to `v`.
    pub fn with_sweep_value(&self, v: f64) -> RunConfig {
        let mut c = self.clone();
        match c.grid.kind {
            GridKindConfig::Adaptive => c.grid.epsilon = Some(v),
            _ => c.grid.n = v as u8,
        }
        c.sweep = None;
        c
    }

    pub fn scheme(&self) -> Scheme {
        Scheme {
            k: self.k,
            grid: self.grid(),
            m: self.scheme.m,
            flux_1d: self.scheme.flux_1d,
            flux_2d: self.scheme.flux_2d,
            solver: self.scheme.solver,
            projection: self.scheme.projection,
            cfl: self.time.cfl,
            dt: self.time.dt,
        }
    }
}
