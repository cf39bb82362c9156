//! TOML run configuration.
//!
//! ```toml
//! input = "panel.csv"
//! output_dir = "out"
//! formats = ["csv", "json"]
//! seed = 7
//!
//! [schema]
//! unit = "state"
//! time = "year"
//!
//! [[analysis]]
//! name = "teen"
//! kind = "decomposition"
//! y = "lemp"
//! x = "lmw"
//! figure = true
//!
//! [[simulation]]
//! name = "baseline"
//! scenario = "parallel-trends"
//! n_units = 2000
//! n_periods = 5
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twfe_core::{BalancedPanel, CovariateSpec, DgpConfig, Scenario, WeightScheme};

use crate::io::Schema;
use crate::AppError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalysisKind {
    Twfe,
    Fd,
    TwoPeriod,
    Multivariate,
    Iv,
    Decomposition,
    GapRestricted,
    Generalized,
    CausalWeights,
}

impl AnalysisKind {
    /// Name of the library operation behind this kind.
    pub fn operation(self) -> &'static str {
        match self {
            AnalysisKind::Twfe => "twfe",
            AnalysisKind::Fd => "fd",
            AnalysisKind::TwoPeriod => "twfe_two_period",
            AnalysisKind::Multivariate => "twfe_multivariate",
            AnalysisKind::Iv => "twfe_iv",
            AnalysisKind::Decomposition => "verify_equivalence",
            AnalysisKind::GapRestricted => "gap_restricted",
            AnalysisKind::Generalized => "generalized_twfe",
            AnalysisKind::CausalWeights => "causal_weights",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    pub name: String,
    pub kind: AnalysisKind,
    pub y: String,
    #[serde(default)]
    pub x: Option<String>,
    /// Regressors for `multivariate`.
    #[serde(default)]
    pub xs: Vec<String>,
    /// Instrument for `iv`.
    #[serde(default)]
    pub z: Option<String>,
    /// Time-varying covariates for `twfe` and `causal-weights`.
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub k: Option<usize>,
    /// Inclusive gap range `[k_min, k_max]`; defaults to every gap.
    #[serde(default)]
    pub gap: Option<[usize; 2]>,
    #[serde(default)]
    pub t: Option<i64>,
    #[serde(default)]
    pub s: Option<i64>,
    #[serde(default)]
    pub weights: WeightScheme,
    #[serde(default)]
    pub se: bool,
    /// Emit the per-gap FD series (`decomposition` only).
    #[serde(default)]
    pub figure: bool,
    #[serde(default)]
    pub spec: CovariateSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub name: String,
    pub scenario: Scenario,
    pub n_units: usize,
    pub n_periods: usize,
    #[serde(default = "default_replications")]
    pub replications: u64,
    /// Defaults to the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub covariates: Vec<String>,
    /// Gap ranges compared in the directional check.
    #[serde(default)]
    pub short_gap: Option<[usize; 2]>,
    #[serde(default)]
    pub long_gap: Option<[usize; 2]>,
    /// Field overrides applied on top of the scenario preset.
    #[serde(default)]
    pub overrides: toml::Table,
}

fn default_replications() -> u64 {
    200
}

impl Simulation {
    pub fn dgp(&self, run_seed: u64) -> Result<DgpConfig, AppError> {
        let seed = self.seed.unwrap_or(run_seed);
        let preset = DgpConfig::preset(self.scenario, self.n_units, self.n_periods, seed);
        if self.overrides.is_empty() {
            return Ok(preset);
        }
        let mut table =
            toml::Table::try_from(&preset).map_err(|e| AppError::Config(format!("simulation `{}`: {e}", self.name)))?;
        for (key, value) in &self.overrides {
            if !table.contains_key(key) || matches!(key.as_str(), "scenario" | "n_units" | "n_periods" | "seed") {
                return Err(AppError::Config(format!("simulation `{}`: cannot override `{key}`", self.name)));
            }
            table.insert(key.clone(), value.clone());
        }
        table
            .try_into()
            .map_err(|e: toml::de::Error| AppError::Config(format!("simulation `{}`: {}", self.name, e.message())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub presample: Option<PathBuf>,
    #[serde(default)]
    pub schema: Option<Schema>,
    #[serde(default, rename = "analysis")]
    pub analyses: Vec<Analysis>,
    #[serde(default, rename = "simulation")]
    pub simulations: Vec<Simulation>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("twfe-output")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(path).map_err(|source| AppError::Io { path: path.into(), source })?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|source| AppError::Toml { path: path.into(), source })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [cfg.input.as_mut(), cfg.presample.as_mut()].into_iter().flatten() {
            *p = base.join(&*p);
        }
        cfg.output_dir = base.join(&cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<(), AppError> {
        let mut names = BTreeSet::new();
        let all = self.analyses.iter().map(|a| &a.name).chain(self.simulations.iter().map(|s| &s.name));
        for name in all {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(AppError::Config(format!(
                    "name `{name}` must be nonempty and use only letters, digits, `-` and `_`"
                )));
            }
            if !names.insert(name) {
                return Err(AppError::Config(format!("duplicate analysis name `{name}`")));
            }
        }
        if !self.analyses.is_empty() && (self.input.is_none() || self.schema.is_none()) {
            return Err(AppError::Config("analyses need both `input` and `[schema]`".into()));
        }
        if self.presample.is_some() && self.input.is_none() {
            return Err(AppError::Config("`presample` given without `input`".into()));
        }
        if self.formats.is_empty() {
            return Err(AppError::Config("`formats` is empty".into()));
        }
        for a in &self.analyses {
            a.validate_shape()?;
        }
        for s in &self.simulations {
            s.dgp(self.seed)?;
        }
        Ok(())
    }
}

impl Analysis {
    fn fail(&self, message: impl std::fmt::Display) -> AppError {
        AppError::Config(format!("analysis `{}`: {message}", self.name))
    }

    fn validate_shape(&self) -> Result<(), AppError> {
        use AnalysisKind::*;
        let needs_x = !matches!(self.kind, Multivariate);
        if needs_x && self.x.is_none() {
            return Err(self.fail("`x` is required"));
        }
        match self.kind {
            Fd if self.k.is_none() => return Err(self.fail("`k` is required")),
            TwoPeriod if self.t.is_none() || self.s.is_none() => return Err(self.fail("`t` and `s` are required")),
            Multivariate if self.xs.is_empty() => return Err(self.fail("`xs` is required")),
            Iv if self.z.is_none() => return Err(self.fail("`z` is required")),
            _ => {}
        }
        if self.se && matches!(self.kind, Multivariate | Iv | CausalWeights) {
            return Err(self.fail(format!("standard errors are not available for `{}`", self.kind.operation())));
        }
        if self.figure && self.kind != Decomposition {
            return Err(self.fail("`figure` applies only to `decomposition`"));
        }
        if !self.covariates.is_empty() && !matches!(self.kind, Twfe | CausalWeights) {
            return Err(self.fail("`covariates` applies only to `twfe` and `causal-weights`"));
        }
        if !self.spec.is_empty() && self.kind != Generalized {
            return Err(self.fail("`spec` applies only to `generalized`"));
        }
        if self.gap.is_some() && !matches!(self.kind, GapRestricted | Generalized) {
            return Err(self.fail("`gap` applies only to `gap-restricted` and `generalized`"));
        }
        Ok(())
    }

    /// Every column the analysis reads.
    pub fn columns(&self) -> Vec<&str> {
        let mut cols: Vec<&str> = vec![self.y.as_str()];
        cols.extend(self.x.as_deref());
        cols.extend(self.xs.iter().map(String::as_str));
        cols.extend(self.z.as_deref());
        cols.extend(self.covariates.iter().map(String::as_str));
        cols.extend(self.spec.time_invariant.iter().map(String::as_str));
        cols.extend(self.spec.differenced.iter().map(String::as_str));
        cols
    }

    /// Checks against the loaded data.
    pub fn validate_columns(&self, panel: &BalancedPanel) -> Result<(), AppError> {
        for col in self.columns() {
            if !panel.has_variable(col) {
                return Err(self.fail(format!("column `{col}` not found in input")));
            }
        }
        for p in &self.spec.pre_period {
            let in_pre = panel.presample().is_some_and(|pre| pre.has_variable(&p.variable));
            if !panel.has_variable(&p.variable) && !in_pre {
                return Err(self.fail(format!("column `{}` not found in input or presample", p.variable)));
            }
        }
        Ok(())
    }
}
