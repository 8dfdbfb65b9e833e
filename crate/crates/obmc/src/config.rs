//! Sweep configuration files and `key=value` overrides.
//!
//! A sweep is described by a TOML file whose keys are the [`SweepConfig`]
//! field names:
//!
//! ```toml
//! shapes = [[100, 100]]
//! ranks = [2]
//! gammas = [1.5]
//! n_values = [1000, 2000, 4000, 8000]
//! estimators = ["nuclear_penalized", "maxnorm_constrained"]
//! generator = "block_sign"
//! sampling_scheme = "iid_uniform"
//! replicates = 20
//! base_seed = 7
//! lambda_grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0]
//!
//! [solver_defaults]
//! max_iters = 2000
//! ```
//!
//! `lambda_grid` holds multipliers of `sqrt((m1 + m2) / n)`. `gamma`,
//! `rank_hint`, `lambda` and `seed` of the solver come from the grid, the
//! penalty selection and the seed derivation, so they are not accepted under
//! `solver_defaults`.

use std::path::Path;

use obmc_core::{Estimator, Generator, SamplingScheme, Shape, SolverConfig};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Whether each replicate draws a fresh ground truth or all replicates of a
/// `(shape, r, gamma)` share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TruthMode {
    #[default]
    Fresh,
    Fixed,
}

impl TruthMode {
    pub fn name(&self) -> &'static str {
        match self {
            TruthMode::Fresh => "fresh",
            TruthMode::Fixed => "fixed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "fresh" => Some(TruthMode::Fresh),
            "fixed" => Some(TruthMode::Fixed),
            _ => None,
        }
    }
}

/// Solver settings shared by every cell. Unset fields keep the
/// [`SolverConfig`] defaults; an unset `factor_width` becomes `2 r`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDefaults {
    pub max_iters: Option<usize>,
    pub rel_tol: Option<f64>,
    pub step_init: Option<f64>,
    pub backtrack_factor: Option<f64>,
    pub factor_width: Option<usize>,
    pub restarts: Option<usize>,
    pub inner_sweeps: Option<usize>,
    pub accelerated: Option<bool>,
}

const SOLVER_DEFAULT_KEYS: &[&str] = &[
    "max_iters",
    "rel_tol",
    "step_init",
    "backtrack_factor",
    "factor_width",
    "restarts",
    "inner_sweeps",
    "accelerated",
];

impl SolverDefaults {
    /// Solver configuration for a cell with amplitude `gamma` and rank `rank`.
    pub fn for_cell(&self, gamma: f64, rank: usize) -> SolverConfig {
        let mut c = SolverConfig::for_truth(gamma, rank);
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.rel_tol {
            c.rel_tol = v;
        }
        if let Some(v) = self.step_init {
            c.step_init = v;
        }
        if let Some(v) = self.backtrack_factor {
            c.backtrack_factor = v;
        }
        if let Some(v) = self.factor_width {
            c.factor_width = v;
        }
        if let Some(v) = self.restarts {
            c.restarts = v;
        }
        if let Some(v) = self.inner_sweeps {
            c.inner_sweeps = v;
        }
        if let Some(v) = self.accelerated {
            c.accelerated = v;
        }
        c
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweepConfig {
    shapes: Vec<[usize; 2]>,
    ranks: Vec<usize>,
    gammas: Vec<f64>,
    n_values: Vec<usize>,
    estimators: Vec<String>,
    #[serde(default = "default_generator")]
    generator: String,
    #[serde(default = "default_scheme")]
    sampling_scheme: String,
    replicates: usize,
    #[serde(default)]
    base_seed: u64,
    #[serde(default)]
    solver_defaults: SolverDefaults,
    #[serde(default = "default_lambda_grid")]
    lambda_grid: Vec<f64>,
    #[serde(default = "default_truth_mode")]
    truth_mode: String,
    #[serde(default)]
    record_timings: bool,
}

const SWEEP_KEYS: &[&str] = &[
    "shapes",
    "ranks",
    "gammas",
    "n_values",
    "estimators",
    "generator",
    "sampling_scheme",
    "replicates",
    "base_seed",
    "solver_defaults",
    "lambda_grid",
    "truth_mode",
    "record_timings",
];

fn default_generator() -> String {
    Generator::BlockSign.name().into()
}

fn default_scheme() -> String {
    SamplingScheme::IidUniform.name().into()
}

fn default_truth_mode() -> String {
    TruthMode::Fresh.name().into()
}

/// Ten geometrically spaced multipliers from `1e-4` to `1`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..10)
        .map(|k| 10f64.powf(-4.0 + 4.0 * k as f64 / 9.0))
        .collect()
}

/// A validated experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub shapes: Vec<Shape>,
    pub ranks: Vec<usize>,
    pub gammas: Vec<f64>,
    pub n_values: Vec<usize>,
    pub estimators: Vec<Estimator>,
    pub generator: Generator,
    pub sampling_scheme: SamplingScheme,
    pub replicates: usize,
    pub base_seed: u64,
    pub solver_defaults: SolverDefaults,
    /// Penalty multipliers of `sqrt((m1 + m2) / n)`.
    pub lambda_grid: Vec<f64>,
    pub truth_mode: TruthMode,
    /// Write measured fit times to the CSV instead of zeros. Timings differ
    /// between runs, so this gives up byte-identical output.
    pub record_timings: bool,
}

impl SweepConfig {
    /// Reads a configuration file and applies `overrides` on top.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, overrides)
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let raw: RawSweepConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawSweepConfig) -> Result<Self> {
        let shapes = raw
            .shapes
            .iter()
            .map(|&[m1, m2]| Shape::new(m1, m2))
            .collect::<obmc_core::Result<Vec<_>>>()?;
        let estimators = raw
            .estimators
            .iter()
            .map(|name| {
                Estimator::from_name(name)
                    .ok_or_else(|| Error::Config(format!("unknown estimator `{name}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let generator = Generator::from_name(&raw.generator)
            .ok_or_else(|| Error::Config(format!("unknown generator `{}`", raw.generator)))?;
        let sampling_scheme = SamplingScheme::from_name(&raw.sampling_scheme).ok_or_else(|| {
            Error::Config(format!("unknown sampling scheme `{}`", raw.sampling_scheme))
        })?;
        let truth_mode = TruthMode::from_name(&raw.truth_mode)
            .ok_or_else(|| Error::Config(format!("unknown truth mode `{}`", raw.truth_mode)))?;
        let config = SweepConfig {
            shapes,
            ranks: raw.ranks,
            gammas: raw.gammas,
            n_values: raw.n_values,
            estimators,
            generator,
            sampling_scheme,
            replicates: raw.replicates,
            base_seed: raw.base_seed,
            solver_defaults: raw.solver_defaults,
            lambda_grid: raw.lambda_grid,
            truth_mode,
            record_timings: raw.record_timings,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.shapes.is_empty()
            || self.ranks.is_empty()
            || self.gammas.is_empty()
            || self.n_values.is_empty()
            || self.estimators.is_empty()
            || self.lambda_grid.is_empty()
        {
            return fail(
                "shapes, ranks, gammas, n_values, estimators and lambda_grid must be nonempty",
            );
        }
        if self.replicates == 0 {
            return fail("replicates must be at least 1");
        }
        if self.n_values.contains(&0) {
            return fail("every n_value must be at least 1");
        }
        if self.ranks.contains(&0) {
            return fail("every rank must be at least 1");
        }
        if self.gammas.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return fail("every gamma must be positive and finite");
        }
        if self
            .lambda_grid
            .iter()
            .any(|l| !(*l > 0.0 && l.is_finite()))
        {
            return fail("lambda_grid values must be positive and finite");
        }
        for shape in &self.shapes {
            for &r in &self.ranks {
                if r > shape.min_dim() {
                    return Err(Error::Config(format!(
                        "rank {r} exceeds min dimension of {}x{}",
                        shape.rows(),
                        shape.cols()
                    )));
                }
                for &g in &self.gammas {
                    self.solver_defaults.for_cell(g, r).validate()?;
                }
            }
            if self.sampling_scheme == SamplingScheme::BernoulliMask {
                if let Some(n) = self.n_values.iter().find(|&&n| n > shape.entry_count()) {
                    return Err(Error::Config(format!(
                        "n = {n} exceeds the {} entries of a {}x{} matrix",
                        shape.entry_count(),
                        shape.rows(),
                        shape.cols()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(text: &str) -> toml::Value {
    let wrapped = format!("v = {text}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(text.to_string())),
        Err(_) => toml::Value::String(text.to_string()),
    }
}

fn split_override(item: &str) -> Result<(&str, &str)> {
    item.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("override `{item}` is not of the form key=value")))
}

/// Applies one `key=value` override to a sweep table. Solver keys may be
/// given bare or as `solver_defaults.<key>`.
fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, value) = split_override(item)?;
    let value = parse_value(value);
    let solver_key = key.strip_prefix("solver_defaults.").unwrap_or(key);
    if SOLVER_DEFAULT_KEYS.contains(&solver_key) {
        let entry = table
            .entry("solver_defaults")
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let Some(sub) = entry.as_table_mut() else {
            return Err(Error::Config("solver_defaults must be a table".into()));
        };
        sub.insert(solver_key.to_string(), value);
        return Ok(());
    }
    if SWEEP_KEYS.contains(&key) && key != "solver_defaults" {
        table.insert(key.to_string(), value);
        return Ok(());
    }
    Err(Error::Config(format!("unknown configuration key `{key}`")))
}

/// Applies `key=value` overrides to a single-fit solver configuration.
pub fn apply_solver_overrides(config: &mut SolverConfig, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, value) = split_override(item)?;
        let bad = || Error::Config(format!("invalid value `{value}` for `{key}`"));
        let float = || value.parse::<f64>().map_err(|_| bad());
        let int = || value.parse::<usize>().map_err(|_| bad());
        match key {
            "gamma" => config.gamma = float()?,
            "rank_hint" => config.rank_hint = int()?,
            "lambda" => config.lambda = float()?,
            "max_iters" => config.max_iters = int()?,
            "rel_tol" => config.rel_tol = float()?,
            "step_init" => config.step_init = float()?,
            "backtrack_factor" => config.backtrack_factor = float()?,
            "factor_width" => config.factor_width = int()?,
            "restarts" => config.restarts = int()?,
            "seed" => config.seed = value.parse().map_err(|_| bad())?,
            "inner_sweeps" => config.inner_sweeps = int()?,
            "accelerated" => config.accelerated = value.parse().map_err(|_| bad())?,
            _ => return Err(Error::Config(format!("unknown solver key `{key}`"))),
        }
    }
    config.validate()?;
    Ok(())
}
