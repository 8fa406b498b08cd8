//! Run configuration: one TOML file with `[model]`, `[grid]`, `[solver]`,
//! `[mc]` and `[output]` sections. Every key has a default, so an empty
//! file describes the reference experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mc::{McConfig, McError};
use crate::model::{ModelParams, ParamError, ValidatedParams};
use crate::solver::{ConfigError, Grid, GridError, SolverConfig};
use crate::traveling_wave::{TravelingWave, WaveError};

/// Snapshot times written when the config does not list any.
pub const DEFAULT_SNAPSHOTS: [f64; 4] = [0.0, 50.0, 100.0, 150.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub xi_min: f64,
    pub xi_max: f64,
    pub dxi: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            xi_min: -5.0,
            xi_max: 20.0,
            dxi: 0.005,
            dt: 0.01,
            t_final: 1500.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, GridError> {
        self.build_until(self.t_final)
    }

    /// Same spatial grid, different horizon.
    pub fn build_until(&self, t_final: f64) -> Result<Grid, GridError> {
        Grid::from_spacing(self.xi_min, self.xi_max, self.dxi, self.dt, t_final)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Times of the stored solution rows; `None` keeps the defaults that
    /// fall inside the horizon.
    pub snapshot_times: Option<Vec<f64>>,
    /// Row stride of `error.csv` and `boundaries.csv`; the last step is
    /// always written.
    pub trace_every: usize,
    pub tw_samples: usize,
    pub tw_xi_min: f64,
    pub tw_xi_max: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshot_times: None,
            trace_every: 1,
            tw_samples: 2001,
            tw_xi_min: -5.0,
            tw_xi_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridConfig,
    pub solver: SolverConfig,
    pub mc: McConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Error)]
pub enum RunConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("[model] {0}")]
    Model(#[from] ParamError),
    #[error("[model] {0}")]
    Wave(#[from] WaveError),
    #[error("[grid] {0}")]
    Grid(#[from] GridError),
    #[error("[solver] {0}")]
    Solver(#[from] ConfigError),
    #[error("[mc] {0}")]
    Mc(#[from] McError),
    #[error("[output] {0}")]
    Output(String),
}

/// A configuration whose sections all passed their checks.
#[derive(Debug, Clone)]
pub struct ValidRun {
    pub params: ValidatedParams,
    pub wave: TravelingWave,
    pub grid: Grid,
    pub solver: SolverConfig,
    pub mc: McConfig,
    pub output: OutputConfig,
    pub snapshot_times: Vec<f64>,
    /// Spatial settings, kept for solves with another horizon.
    pub grid_config: GridConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a file, or returns the defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self, RunConfigError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| RunConfigError::Read {
                    path: p.display().to_string(),
                    source,
                })?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn validate(&self) -> Result<ValidRun, RunConfigError> {
        let params = self.model.validate()?;
        let wave = TravelingWave::build(&params)?;
        let grid = self.grid.build()?;
        grid.check_domain(&wave)?;
        self.solver.validate()?;
        self.mc.validate()?;
        let out = &self.output;
        if out.trace_every == 0 {
            return Err(RunConfigError::Output("trace_every must be >= 1".into()));
        }
        if out.tw_samples < 2 {
            return Err(RunConfigError::Output("tw_samples must be >= 2".into()));
        }
        if !(out.tw_xi_min < out.tw_xi_max) || !out.tw_xi_min.is_finite() || !out.tw_xi_max.is_finite() {
            return Err(RunConfigError::Output("tw_xi_min must be below tw_xi_max".into()));
        }
        let horizon = grid.final_time();
        let snapshot_times = match &out.snapshot_times {
            Some(ts) => {
                if let Some(t) = ts.iter().find(|&&t| !(t >= 0.0 && t <= horizon)) {
                    return Err(RunConfigError::Output(format!(
                        "snapshot time {t} outside [0, {horizon}]"
                    )));
                }
                ts.clone()
            }
            None => DEFAULT_SNAPSHOTS.iter().copied().filter(|&t| t <= horizon).collect(),
        };
        Ok(ValidRun {
            params,
            wave,
            grid,
            solver: self.solver,
            mc: self.mc,
            output: out.clone(),
            snapshot_times,
            grid_config: self.grid,
        })
    }
}
