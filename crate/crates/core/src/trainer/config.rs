use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::critic::{CriticConfig, PenaltyMode};
use crate::error::{Error, Result};
use crate::nn::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Exact,
    Directional,
}

/// Every knob of a training run. Parsed from flat `key = value` text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Gradient penalty weight.
    pub lambda: f64,
    /// Weight of the MSE term in the reward.
    pub alpha: f64,
    /// Entropy bonus weight.
    pub beta: f64,
    /// Discretization steps per filter.
    pub levels: usize,
    /// Critic updates per generator update.
    pub critic_updates: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub generator_steps: usize,
    pub replay_capacity: usize,
    pub seed: u64,
    pub penalty: PenaltyKind,
    pub penalty_step: f64,
    pub penalty_directions: usize,
    pub critic_channels: Vec<usize>,
    pub agent_channels: Vec<usize>,
    /// Write an intermediate checkpoint every this many generator steps; 0 disables.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 10.0,
            alpha: 100.0,
            beta: 0.001,
            levels: 33,
            critic_updates: 5,
            lr: 1e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            adam_eps: 1e-8,
            batch_size: 8,
            generator_steps: 2000,
            replay_capacity: 2048,
            seed: 0,
            penalty: PenaltyKind::Exact,
            penalty_step: 1e-2,
            penalty_directions: 4,
            critic_channels: CriticConfig::default().channels,
            agent_channels: AgentConfig::default().trunk_channels,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Apply one `key = value` override, as given on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).expect("config always serializes");
        if !table.contains_key(key) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        let parsed: toml::Table = toml::from_str(&format!("{key} = {value}"))
            .or_else(|_| toml::from_str(&format!("{key} = {value:?}")))
            .map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
        table.extend(parsed);
        let cfg: TrainConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lr", self.lr),
            ("adam_eps", self.adam_eps),
            ("penalty_step", self.penalty_step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        if self.levels < 2 {
            return Err(Error::Config(format!("levels must be at least 2, got {}", self.levels)));
        }
        let counts = [
            ("critic_updates", self.critic_updates),
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("penalty_directions", self.penalty_directions),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.agent_channels.is_empty() || self.agent_channels.contains(&0) {
            return Err(Error::Config("agent_channels must be a non-empty list of positive sizes".into()));
        }
        if self.critic_channels.contains(&0) {
            return Err(Error::Config("critic_channels must be positive".into()));
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            trunk_channels: self.agent_channels.clone(),
            levels: self.levels,
            ..AgentConfig::default()
        }
    }

    pub fn critic_config(&self) -> CriticConfig {
        CriticConfig {
            channels: self.critic_channels.clone(),
            ..CriticConfig::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn penalty_mode(&self) -> PenaltyMode {
        match self.penalty {
            PenaltyKind::Exact => PenaltyMode::Exact {
                step: self.penalty_step,
            },
            PenaltyKind::Directional => PenaltyMode::Directional {
                directions: self.penalty_directions,
                step: self.penalty_step,
            },
        }
    }
}
