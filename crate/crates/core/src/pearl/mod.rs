//! Latent-context meta-RL: a permutation-invariant task encoder feeding a
//! latent-conditioned SAC learner, meta-trained over a task family and adapted
//! at test time by inference alone.

mod agent;
mod encoder;
mod latent;
mod posterior;
mod train;

use serde::{Deserialize, Serialize};

pub use agent::{adapt, collect_rollout, AdaptationResult, PearlAgent, TrialRecord};
pub use encoder::{context_rows, ContextBatch, ContextEncoder, ContextTuple, EncodedFactors, CONTEXT_WIDTH, VAR_FLOOR};
pub use latent::{infer_latents, latent_backward, LatentBatch};
pub use posterior::{product_backward, LatentPosterior};
pub use train::{meta_train, MetaTrainConfig, MetaTrainLogRow, MetaTrainOutcome, MetaTrainer, TrainStepStats};

use crate::sac::{SacConfig, SacError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PearlConfig {
    pub latent_dim: usize,
    /// Weight of the KL term in the encoder objective.
    pub beta: f64,
    pub encoder_hidden: Vec<usize>,
    pub encoder_lr: f64,
    pub sac: SacConfig,
}

impl Default for PearlConfig {
    fn default() -> Self {
        Self {
            latent_dim: 5,
            beta: 1.0,
            encoder_hidden: vec![64, 64],
            encoder_lr: 3e-4,
            sac: SacConfig {
                batch_size: 64,
                reward_scale: 100.0,
                ..SacConfig::default()
            },
        }
    }
}

impl PearlConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        self.sac.validate()?;
        if self.latent_dim == 0 || self.beta < 0.0 || self.encoder_lr < 0.0 {
            return Err(SacError::Config(format!("invalid latent settings: {self:?}")));
        }
        Ok(())
    }
}
