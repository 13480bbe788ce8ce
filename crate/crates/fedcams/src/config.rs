//! Experiment configuration: one JSON document per run, strict schema
//! (unknown fields are rejected so typos fail fast instead of silently
//! using defaults).

use crate::client::LocalRunConfig;
use crate::compressors::CompressorSpec;
use crate::error::{Error, Result};
use crate::objectives::ObjectiveSpec;
use crate::rng::SeedSpec;
use crate::sampler::ParticipationSpec;
use crate::server::{OptimizerFamily, ServerHyper};
use serde::{Deserialize, Serialize};
use std::path::Path;

fn default_beta1() -> f64 {
    0.9
}

fn default_beta2() -> f64 {
    0.99
}

fn default_eval_every() -> u64 {
    1
}

/// Server-side optimizer settings. `epsilon` and `eta` fall back to
/// per-family defaults when omitted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub family: OptimizerFamily,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl OptimizerConfig {
    pub fn resolved_epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or_else(|| self.family.default_epsilon())
    }

    pub fn resolved_eta(&self) -> f64 {
        self.eta.unwrap_or(1.0)
    }

    pub fn server_hyper(&self) -> ServerHyper {
        ServerHyper {
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.resolved_epsilon(),
            eta: self.resolved_eta(),
        }
    }
}

/// A full experiment: objective, optimizer, local-update schedule,
/// participation pattern, optional compression, and run length.
///
/// `compressor` controls which aggregation path runs. Absent means raw
/// client updates are averaged directly. Present — including the identity
/// compressor — routes every update through the compress/feedback path
/// with per-client error memory. The identity setting therefore exercises
/// the compressed code path while transmitting lossless payloads, which is
/// what makes the "identity compression changes nothing" check meaningful.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerConfig,
    pub local: LocalRunConfig,
    pub participation: ParticipationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compressor: Option<CompressorSpec>,
    pub rounds: u64,
    pub master_seed: u64,
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.local.validate()?;
        self.participation.validate()?;
        self.optimizer.server_hyper().validate()?;
        if self.participation.m != self.objective.num_clients {
            return Err(Error::Config(format!(
                "participation.m ({}) must equal objective.num_clients ({})",
                self.participation.m, self.objective.num_clients
            )));
        }
        if let Some(c) = &self.compressor {
            c.validate()?;
            if *c != CompressorSpec::Identity && self.optimizer.family != OptimizerFamily::Fedams {
                return Err(Error::Config(format!(
                    "lossy compression requires the fedams family, got {}",
                    self.optimizer.family.name()
                )));
            }
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        Ok(())
    }

    pub fn seed_spec(&self) -> SeedSpec {
        SeedSpec::new(self.master_seed)
    }

    /// True when updates flow through the compress/feedback path.
    pub fn uses_error_feedback(&self) -> bool {
        self.compressor.is_some()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }
}
