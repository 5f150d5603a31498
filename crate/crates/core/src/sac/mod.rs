//! Soft actor-critic with twin critics, a fixed entropy weight and an optional
//! latent input shared with the meta-learner.

mod agent;
mod replay;
mod trainer;

use serde::{Deserialize, Serialize};

pub use agent::{standard_normal, ActorStep, Batch, CriticStep, SacAgent, SacNets, SacPolicy, UpdateStats};
pub use replay::ReplayBuffer;
pub use trainer::{evaluate, train_sac, SacLogRow, SacTrainConfig, SacTrainOutcome};

use crate::env::EnvError;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum SacError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("non-finite Bellman target at row {0}")]
    NonFiniteTarget(usize),
    #[error("buffer holds {have} transitions, batch needs {need}")]
    Underfilled { have: usize, need: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub gamma: f64,
    pub tau: f64,
    /// Fixed entropy weight.
    pub alpha: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    /// Observations are divided by this length (m) before entering a network.
    pub obs_scale: f64,
    /// Rewards are multiplied by this factor before entering the critic.
    pub reward_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            alpha: 0.1,
            batch_size: 128,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            hidden: vec![64, 64],
            buffer_capacity: 100_000,
            obs_scale: 5e-3,
            reward_scale: 1.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        let ok = self.gamma > 0.0
            && self.gamma < 1.0
            && self.tau > 0.0
            && self.tau <= 1.0
            && self.alpha >= 0.0
            && self.batch_size >= 1
            && self.actor_lr >= 0.0
            && self.critic_lr >= 0.0
            && self.buffer_capacity >= 1
            && self.obs_scale > 0.0
            && self.reward_scale.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SacError::Config(format!("{self:?}")))
        }
    }
}
