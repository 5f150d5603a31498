use std::path::Path;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::baselines::SearchConfig;
use crate::env::TaskFamily;
use crate::grasp::GraspInjection;
use crate::pearl::{MetaTrainConfig, PearlConfig};
use crate::sac::{SacConfig, SacTrainConfig};

/// Every tunable of training and evaluation as one flat table. Missing keys
/// take the library defaults; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `plug` or `gear`; ignored when `family_file` is set.
    pub family: String,
    pub family_file: Option<String>,

    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub obs_scale: f64,

    pub latent_dim: usize,
    pub beta: f64,
    pub encoder_hidden: Vec<usize>,
    pub encoder_lr: f64,
    pub pearl_batch_size: usize,
    pub pearl_reward_scale: f64,
    pub num_tasks: usize,
    pub iterations: usize,
    pub tasks_per_iteration: usize,
    pub rollouts_per_task: usize,
    pub initial_rollouts: usize,
    pub train_steps_per_iteration: usize,
    pub meta_batch: usize,
    pub context_size: usize,

    pub sac_batch_size: usize,
    pub sac_reward_scale: f64,
    pub sac_total_steps: usize,
    pub sac_warmup_steps: usize,
    pub sac_eval_every: usize,
    pub sac_eval_episodes: usize,

    pub draws: usize,
    pub episodes: usize,
    /// Unscored adaptation trials before each draw's scored PEARL episodes.
    pub warmup_trials: usize,
    pub adapt_trials: usize,
    pub repeats: usize,
    pub grasp_injection: bool,
    pub grasp_correction: bool,
    pub grasp_max_error_mm: f64,
    pub mm_per_px: f64,

    pub search_max_points: usize,
    pub search_step_budget: usize,
    pub search_square_side_mm: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sac = SacConfig::default();
        let pearl = PearlConfig::default();
        let meta = MetaTrainConfig::default();
        let sac_train = SacTrainConfig::default();
        let search = SearchConfig::default();
        let grasp = GraspInjection::default();
        Self {
            family: "plug".into(),
            family_file: None,
            gamma: sac.gamma,
            tau: sac.tau,
            alpha: sac.alpha,
            actor_lr: sac.actor_lr,
            critic_lr: sac.critic_lr,
            hidden: sac.hidden.clone(),
            buffer_capacity: sac.buffer_capacity,
            obs_scale: sac.obs_scale,
            latent_dim: pearl.latent_dim,
            beta: pearl.beta,
            encoder_hidden: pearl.encoder_hidden,
            encoder_lr: pearl.encoder_lr,
            pearl_batch_size: pearl.sac.batch_size,
            pearl_reward_scale: pearl.sac.reward_scale,
            num_tasks: meta.num_tasks,
            iterations: meta.iterations,
            tasks_per_iteration: meta.tasks_per_iteration,
            rollouts_per_task: meta.rollouts_per_task,
            initial_rollouts: meta.initial_rollouts,
            train_steps_per_iteration: meta.train_steps_per_iteration,
            meta_batch: meta.meta_batch,
            context_size: meta.context_size,
            sac_batch_size: sac.batch_size,
            sac_reward_scale: sac.reward_scale,
            sac_total_steps: sac_train.total_steps,
            sac_warmup_steps: sac_train.warmup_steps,
            sac_eval_every: sac_train.eval_every,
            sac_eval_episodes: sac_train.eval_episodes,
            draws: 20,
            episodes: 5,
            warmup_trials: 10,
            adapt_trials: 20,
            repeats: 20,
            grasp_injection: false,
            grasp_correction: true,
            grasp_max_error_mm: grasp.max_error * 1e3,
            mm_per_px: grasp.mm_per_pixel,
            search_max_points: search.max_points,
            search_step_budget: search.step_budget,
            search_square_side_mm: search.square_side * 1e3,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        toml::from_str(text).map_err(|e| BenchError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn task_family(&self) -> Result<TaskFamily, BenchError> {
        match &self.family_file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| BenchError::Io(format!("{p}: {e}")))?;
                Ok(TaskFamily::from_kv_str(&text)?)
            }
            None => Ok(TaskFamily::by_name(&self.family)?),
        }
    }

    fn sac_base(&self, batch_size: usize, reward_scale: f64) -> SacConfig {
        SacConfig {
            gamma: self.gamma,
            tau: self.tau,
            alpha: self.alpha,
            batch_size,
            actor_lr: self.actor_lr,
            critic_lr: self.critic_lr,
            hidden: self.hidden.clone(),
            buffer_capacity: self.buffer_capacity,
            obs_scale: self.obs_scale,
            reward_scale,
        }
    }

    pub fn pearl(&self) -> PearlConfig {
        PearlConfig {
            latent_dim: self.latent_dim,
            beta: self.beta,
            encoder_hidden: self.encoder_hidden.clone(),
            encoder_lr: self.encoder_lr,
            sac: self.sac_base(self.pearl_batch_size, self.pearl_reward_scale),
        }
    }

    pub fn meta_train(&self) -> MetaTrainConfig {
        MetaTrainConfig {
            num_tasks: self.num_tasks,
            iterations: self.iterations,
            tasks_per_iteration: self.tasks_per_iteration,
            rollouts_per_task: self.rollouts_per_task,
            initial_rollouts: self.initial_rollouts,
            train_steps_per_iteration: self.train_steps_per_iteration,
            meta_batch: self.meta_batch,
            context_size: self.context_size,
        }
    }

    pub fn sac_train(&self) -> SacTrainConfig {
        SacTrainConfig {
            sac: self.sac_base(self.sac_batch_size, self.sac_reward_scale),
            total_steps: self.sac_total_steps,
            warmup_steps: self.sac_warmup_steps,
            eval_every: self.sac_eval_every,
            eval_episodes: self.sac_eval_episodes,
            deterministic_eval: true,
        }
    }

    pub fn search(&self) -> SearchConfig {
        SearchConfig {
            max_points: self.search_max_points,
            step_budget: self.search_step_budget,
            square_side: self.search_square_side_mm * 1e-3,
            ..SearchConfig::default()
        }
    }

    pub fn grasp(&self) -> Option<GraspInjection> {
        self.grasp_injection.then(|| GraspInjection {
            max_error: self.grasp_max_error_mm * 1e-3,
            mm_per_pixel: self.mm_per_px,
            ..GraspInjection::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_match_library() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
        assert_eq!(c.pearl(), PearlConfig::default());
        assert_eq!(c.meta_train(), MetaTrainConfig::default());
        assert_eq!(c.search(), SearchConfig::default());
    }

    #[test]
    fn partial_file_and_unknown_key() {
        let c = RunConfig::from_toml("beta = 0.1\niterations = 7\n").unwrap();
        assert_eq!(c.beta, 0.1);
        assert_eq!(c.iterations, 7);
        assert_eq!(c.latent_dim, 5);
        assert!(RunConfig::from_toml("betta = 1.0").is_err());
    }
}
