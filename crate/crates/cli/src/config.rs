//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment, lists are comma separated and may
//! be empty. Unknown or repeated keys are errors. Optional keys
//! (`sampler.burn_in`, `sampler.n_modes`) fall back to 20% of `n_steps` and to
//! every mode when absent.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use hypobridge_core::sampler::SamplerConfig;
use hypobridge_core::{builtin, make_grid, BridgeProblem, PathGrid};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSection {
    pub horizon: f64,
    pub mass: f64,
    pub dim: usize,
    pub x_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub force_name: String,
    pub force_params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSection {
    pub dtau: f64,
    pub n_steps: usize,
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub n_modes: Option<usize>,
    pub galerkin_fejer: bool,
    pub seed: u64,
    pub chains: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSection {
    pub n_samples: usize,
    pub epsilon: f64,
    pub n_sde_steps: usize,
    pub rejection: bool,
    pub n_attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSection,
    pub intervals: usize,
    pub eigs_count: usize,
    pub sampler: SamplerSection,
    pub oracle: OracleSection,
    pub z_threshold: f64,
    pub directory: String,
    pub formats: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSection {
                horizon: 1.0,
                mass: 0.2,
                dim: 1,
                x_minus: vec![0.0],
                x_plus: vec![1.0],
                force_name: "zero".into(),
                force_params: Vec::new(),
            },
            intervals: 64,
            eigs_count: 20,
            sampler: SamplerSection {
                dtau: 1e-3,
                n_steps: 10_000,
                burn_in: None,
                thin: 1,
                n_modes: None,
                galerkin_fejer: false,
                seed: 0,
                chains: 1,
            },
            oracle: OracleSection {
                n_samples: 10_000,
                epsilon: 0.05,
                n_sde_steps: 1000,
                rejection: false,
                n_attempts: 100_000,
            },
            z_threshold: 3.0,
            directory: "out".into(),
            formats: vec!["csv".into(), "json".into()],
        }
    }
}

pub const KEYS: &[&str] = &[
    "problem.T",
    "problem.m",
    "problem.d",
    "problem.x_minus",
    "problem.x_plus",
    "problem.force.name",
    "problem.force.params",
    "grid.J",
    "eigs.count",
    "sampler.dtau",
    "sampler.n_steps",
    "sampler.burn_in",
    "sampler.thin",
    "sampler.n_modes",
    "sampler.galerkin_fejer",
    "sampler.seed",
    "sampler.chains",
    "oracle.n_samples",
    "oracle.epsilon",
    "oracle.n_sde_steps",
    "oracle.rejection",
    "oracle.n_attempts",
    "compare.z",
    "output.directory",
    "output.formats",
];

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn scalar<T: FromStr>(key: &str, raw: &str) -> Result<T, CliError> {
    raw.parse()
        .map_err(|_| usage(format!("`{key}`: cannot parse `{raw}`")))
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>, CliError> {
    if raw.is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',').map(|v| scalar(key, v.trim())).collect()
}

fn boolean(key: &str, raw: &str) -> Result<bool, CliError> {
    match raw {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(usage(format!("`{key}`: expected true or false, got `{raw}`"))),
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("line {}: expected `key = value`", n + 1)))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(usage(format!("line {}: unknown key `{key}`", n + 1)));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(usage(format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        let mut cfg = Self::default();
        for (key, raw) in &entries {
            cfg.set(key, raw)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// Assigns one key; `key=value` overrides from the command line go through here.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), CliError> {
        let raw = raw.trim();
        match key {
            "problem.T" => self.problem.horizon = scalar(key, raw)?,
            "problem.m" => self.problem.mass = scalar(key, raw)?,
            "problem.d" => self.problem.dim = scalar(key, raw)?,
            "problem.x_minus" => self.problem.x_minus = list(key, raw)?,
            "problem.x_plus" => self.problem.x_plus = list(key, raw)?,
            "problem.force.name" => self.problem.force_name = raw.to_string(),
            "problem.force.params" => self.problem.force_params = list(key, raw)?,
            "grid.J" => self.intervals = scalar(key, raw)?,
            "eigs.count" => self.eigs_count = scalar(key, raw)?,
            "sampler.dtau" => self.sampler.dtau = scalar(key, raw)?,
            "sampler.n_steps" => self.sampler.n_steps = scalar(key, raw)?,
            "sampler.burn_in" => self.sampler.burn_in = Some(scalar(key, raw)?),
            "sampler.thin" => self.sampler.thin = scalar(key, raw)?,
            "sampler.n_modes" => self.sampler.n_modes = Some(scalar(key, raw)?),
            "sampler.galerkin_fejer" => self.sampler.galerkin_fejer = boolean(key, raw)?,
            "sampler.seed" => self.sampler.seed = scalar(key, raw)?,
            "sampler.chains" => self.sampler.chains = scalar(key, raw)?,
            "oracle.n_samples" => self.oracle.n_samples = scalar(key, raw)?,
            "oracle.epsilon" => self.oracle.epsilon = scalar(key, raw)?,
            "oracle.n_sde_steps" => self.oracle.n_sde_steps = scalar(key, raw)?,
            "oracle.rejection" => self.oracle.rejection = boolean(key, raw)?,
            "oracle.n_attempts" => self.oracle.n_attempts = scalar(key, raw)?,
            "compare.z" => self.z_threshold = scalar(key, raw)?,
            "output.directory" => self.directory = raw.to_string(),
            "output.formats" => self.formats = list(key, raw)?,
            _ => return Err(usage(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks that do not need the core constructors.
    pub fn check(&self) -> Result<(), CliError> {
        if let Some(f) = self.formats.iter().find(|f| *f != "csv" && *f != "json") {
            return Err(usage(format!("`output.formats`: unknown format `{f}`")));
        }
        if self.eigs_count == 0 {
            return Err(usage("`eigs.count` must be at least 1"));
        }
        if !(self.z_threshold > 0.0) {
            return Err(usage("`compare.z` must be positive"));
        }
        if self.directory.is_empty() {
            return Err(usage("`output.directory` must not be empty"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let p = &self.problem;
        let s = &self.sampler;
        let o = &self.oracle;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("problem.T", p.horizon.to_string());
        line("problem.m", p.mass.to_string());
        line("problem.d", p.dim.to_string());
        line("problem.x_minus", join(&p.x_minus));
        line("problem.x_plus", join(&p.x_plus));
        line("problem.force.name", p.force_name.clone());
        line("problem.force.params", join(&p.force_params));
        line("grid.J", self.intervals.to_string());
        line("eigs.count", self.eigs_count.to_string());
        line("sampler.dtau", s.dtau.to_string());
        line("sampler.n_steps", s.n_steps.to_string());
        if let Some(b) = s.burn_in {
            line("sampler.burn_in", b.to_string());
        }
        line("sampler.thin", s.thin.to_string());
        if let Some(n) = s.n_modes {
            line("sampler.n_modes", n.to_string());
        }
        line("sampler.galerkin_fejer", s.galerkin_fejer.to_string());
        line("sampler.seed", s.seed.to_string());
        line("sampler.chains", s.chains.to_string());
        line("oracle.n_samples", o.n_samples.to_string());
        line("oracle.epsilon", o.epsilon.to_string());
        line("oracle.n_sde_steps", o.n_sde_steps.to_string());
        line("oracle.rejection", o.rejection.to_string());
        line("oracle.n_attempts", o.n_attempts.to_string());
        line("compare.z", self.z_threshold.to_string());
        line("output.directory", self.directory.clone());
        line("output.formats", self.formats.join(","));
        out
    }

    pub fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }

    pub fn build_problem(&self) -> Result<BridgeProblem, CliError> {
        let p = &self.problem;
        let field = builtin(&p.force_name, &p.force_params, p.dim)?;
        if p.x_minus.len() != p.dim || p.x_plus.len() != p.dim {
            return Err(usage(format!(
                "`problem.x_minus` and `problem.x_plus` need {} entries each",
                p.dim
            )));
        }
        Ok(BridgeProblem::new(p.horizon, p.mass, p.x_minus.clone(), p.x_plus.clone(), field)?)
    }

    pub fn free_problem(&self) -> Result<BridgeProblem, CliError> {
        Ok(self.build_problem()?.with_field(Arc::new(hypobridge_core::field::ZeroField))?)
    }

    pub fn grid(&self) -> Result<PathGrid, CliError> {
        Ok(make_grid(self.problem.horizon, self.intervals)?)
    }

    pub fn sampler_config(&self, grid: &PathGrid) -> Result<SamplerConfig, CliError> {
        let s = &self.sampler;
        let base = SamplerConfig::for_grid(grid, s.n_steps);
        let cfg = SamplerConfig {
            dtau: s.dtau,
            burn_in: s.burn_in.unwrap_or(base.burn_in),
            thin: s.thin,
            n_modes: s.n_modes.unwrap_or(base.n_modes),
            galerkin_fejer: s.galerkin_fejer,
            seed: s.seed,
            chains: s.chains,
            ..base
        };
        cfg.validate(grid)?;
        Ok(cfg)
    }
}
