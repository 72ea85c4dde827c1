//! Run settings from a TOML file of flat keys, overridden by flags.

use std::path::{Path, PathBuf};

use cdfo::{ModelKind, SolverConfig};
use serde::Deserialize;

use crate::error::{config, io, CliError};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CDFO_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "cdfo-out";

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub problem: Option<String>,
    pub region: Option<String>,
    pub x0: Option<Vec<f64>>,
    pub model: Option<String>,
    pub points: Option<usize>,
    pub lambda: Option<f64>,
    pub max_evals: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    pub delta0: Option<f64>,
    pub delta_max: Option<f64>,
    pub gamma_dec: Option<f64>,
    pub gamma_inc: Option<f64>,
    pub eps_c: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub c1: Option<f64>,
    pub delta_min: Option<f64>,
    pub max_iterations: Option<usize>,
    pub random_starts: Option<usize>,

    /// Batch lists for `bench`.
    pub problems: Option<Vec<String>>,
    pub models: Option<Vec<String>>,
    pub seeds: Option<Vec<u64>>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident; $($f:ident),*) => {
        Settings { $($f: $top.$f.or($base.$f)),* }
    };
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Settings, CliError> {
        let Some(path) = path else { return Ok(Settings::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
        toml::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))
    }

    /// Keys set in `top` win.
    pub fn overlay(self, top: Settings) -> Settings {
        let base = self;
        overlay_fields!(base, top;
            problem, region, x0, model, points, lambda, max_evals, seed, out,
            delta0, delta_max, gamma_dec, gamma_inc, eps_c, mu, eta, c1, delta_min,
            max_iterations, random_starts, problems, models, seeds)
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        parse_model(self.model.as_deref().unwrap_or("mfn"))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    /// Solver parameters: library defaults with the keys given here applied.
    pub fn solver_config(&self, kind: ModelKind) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            delta0: self.delta0.unwrap_or(d.delta0),
            delta_max: self.delta_max.unwrap_or(d.delta_max),
            gamma_dec: self.gamma_dec.unwrap_or(d.gamma_dec),
            gamma_inc: self.gamma_inc.unwrap_or(d.gamma_inc),
            eps_c: self.eps_c.unwrap_or(d.eps_c),
            mu: self.mu.unwrap_or(d.mu),
            eta: self.eta.unwrap_or(d.eta),
            lambda: self.lambda.unwrap_or(d.lambda),
            c1: self.c1.unwrap_or(d.c1),
            delta_min: self.delta_min.unwrap_or(d.delta_min),
            budget: self.max_evals.unwrap_or(d.budget),
            max_iterations: self.max_iterations.unwrap_or(d.max_iterations),
            model_kind: kind,
            points: self.points,
            seed: self.seed(),
            random_starts: self.random_starts.unwrap_or(d.random_starts),
        }
    }

    /// `--out`, then the config key, then `$CDFO_OUT_DIR`, then `cdfo-out`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

pub fn parse_model(s: &str) -> Result<ModelKind, CliError> {
    s.parse().map_err(config)
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io(path, e))
}
