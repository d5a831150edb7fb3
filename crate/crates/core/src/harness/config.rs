//! Experiment configuration files (JSON).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::EnvSpec;
use crate::learner::LearnerConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_eval_episodes: usize,
    /// Step cap per evaluation episode.
    pub eval_horizon: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_eval_episodes: 100,
            eval_horizon: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0],
            seeds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl ExperimentConfig {
    /// Parses and validates a config. Errors carry the offending key path
    /// and, for syntax and type errors, the line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed JSON: {e}")))?;
        match value.get("env") {
            None => return Err(Error::Config("missing key `env`".into())),
            Some(env) if env.get("type").is_none() => {
                return Err(Error::Config("missing key `env.type`".into()));
            }
            Some(_) => {}
        }
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let config_err = |e: Error| Error::Config(e.to_string());
        self.env.validate().map_err(config_err)?;
        self.learner.validate().map_err(config_err)?;
        if let Some(l) = self.sweep.lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::Config(format!("sweep.lambdas: {l} is outside [0,1]")));
        }
        if self.sweep.lambdas.is_empty() {
            return Err(Error::Config("sweep.lambdas must not be empty".into()));
        }
        if self.sweep.seeds.is_empty() {
            return Err(Error::Config("sweep.seeds needs at least one seed".into()));
        }
        if self.eval.n_eval_episodes == 0 {
            return Err(Error::Config("eval.n_eval_episodes must be positive".into()));
        }
        Ok(())
    }

    /// Replaces the learner seed with `seed` and the sweep seeds with
    /// `seed, seed + 1, ..` (same count).
    pub fn override_seed(&mut self, seed: u64) {
        self.learner.seed = seed;
        let count = self.sweep.seeds.len() as u64;
        self.sweep.seeds = (0..count).map(|j| seed.wrapping_add(j)).collect();
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn sha256(&self) -> Result<String> {
        let canonical = serde_json::to_string(self)?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}
