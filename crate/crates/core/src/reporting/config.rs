use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::acquisition::AcquisitionConfig;
use crate::engine::{InitScheme, RunConfig, StrategyKind};
use crate::mcmc::McmcConfig;
use crate::problems::PROBLEM_NAMES;

/// Per-strategy changes on top of the shared `[run]` table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOverride {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bo: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_scheme: Option<InitScheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acquisition: Option<AcquisitionConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc: Option<McmcConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub strategies: Vec<StrategyKind>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<StrategyKind, RunOverride>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ReportError> {
        if !PROBLEM_NAMES.contains(&self.problem.as_str()) {
            return Err(ReportError::Config(format!(
                "unknown problem `{}`; known problems: {}",
                self.problem,
                PROBLEM_NAMES.join(", ")
            )));
        }
        if self.strategies.is_empty() {
            return Err(ReportError::Config("`strategies` needs at least one entry".into()));
        }
        if self.seeds.is_empty() {
            return Err(ReportError::Config("`seeds` needs at least one entry".into()));
        }
        for &s in &self.strategies {
            self.run_config(s, 0).validate(s).map_err(|e| ReportError::Config(format!("strategy {s}: {e}")))?;
        }
        Ok(())
    }

    /// The run settings for one `(strategy, seed)` pair.
    pub fn run_config(&self, strategy: StrategyKind, seed: u64) -> RunConfig {
        let mut cfg = RunConfig { seed, ..self.run.clone() };
        if let Some(o) = self.overrides.get(&strategy) {
            if let Some(v) = o.n_init {
                cfg.n_init = v;
            }
            if let Some(v) = o.n_bo {
                cfg.n_bo = v;
            }
            if let Some(v) = o.init_scheme {
                cfg.init_scheme = v;
            }
            if let Some(v) = &o.acquisition {
                cfg.acquisition = v.clone();
            }
            if let Some(v) = o.mcmc {
                cfg.mcmc = v;
            }
        }
        cfg
    }

    pub fn to_toml(&self) -> Result<String, ReportError> {
        Ok(toml::to_string(self)?)
    }
}

/// Parses and validates a TOML experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ReportError> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}
