//! Single-task SAC trained from scratch, the non-meta baseline.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ReplayBuffer, SacAgent, SacConfig, SacError, SacPolicy};
use crate::env::{run_episode, Action, EnvConfig, InsertionEnv, RewardMode, TaskParams};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacTrainConfig {
    pub sac: SacConfig,
    /// Environment steps, one gradient update each after warm-up.
    pub total_steps: usize,
    /// Initial steps with uniformly random actions.
    pub warmup_steps: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    pub deterministic_eval: bool,
}

impl Default for SacTrainConfig {
    fn default() -> Self {
        Self {
            sac: SacConfig::default(),
            total_steps: 200_000,
            warmup_steps: 1_000,
            eval_every: 5_000,
            eval_episodes: 5,
            deterministic_eval: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SacLogRow {
    pub step: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
}

pub struct SacTrainOutcome {
    pub agent: SacAgent,
    pub log: Vec<SacLogRow>,
}

/// Mean return and success rate of `agent` over `episodes` fresh resets.
pub fn evaluate(
    agent: &SacAgent,
    env: &mut InsertionEnv,
    episodes: usize,
    stochastic: bool,
    seed: u64,
) -> Result<(f64, f64), SacError> {
    let mut ret = 0.0;
    let mut succ = 0usize;
    for e in 0..episodes {
        let mut rng = rng_from_seed(derive_seed(seed, &[e as u64]));
        let mut pol = SacPolicy {
            agent,
            z: Vec::new(),
            stochastic,
        };
        let res = run_episode(env, &mut pol, &mut rng)?;
        ret += res.total_reward;
        succ += res.success as usize;
    }
    let n = episodes.max(1) as f64;
    Ok((ret / n, succ as f64 / n))
}

pub fn train_sac(
    env_cfg: &EnvConfig,
    task: &TaskParams,
    mode: RewardMode,
    cfg: &SacTrainConfig,
    seed: u64,
) -> Result<SacTrainOutcome, SacError> {
    let mut init_rng = rng_from_seed(derive_seed(seed, &[0]));
    let mut rng = rng_from_seed(derive_seed(seed, &[1]));
    let mut agent = SacAgent::new(cfg.sac.clone(), 0, env_cfg.max_step, &mut init_rng)?;
    let mut env = InsertionEnv::new(env_cfg.clone(), task.clone(), mode)?;
    let mut eval_env = env.clone();
    let mut buffer = ReplayBuffer::new(cfg.sac.buffer_capacity);
    let no_z = Array2::zeros((cfg.sac.batch_size, 0));
    let mut log = Vec::new();
    let (mut closs, mut aloss) = (f64::NAN, f64::NAN);
    let mut obs = env.reset(&mut rng);
    for step in 1..=cfg.total_steps {
        let action = if step <= cfg.warmup_steps {
            let m = env_cfg.max_step;
            Action::new(
                rng.random_range(-m..=m),
                rng.random_range(-m..=m),
                rng.random_range(-m..=m),
            )
        } else {
            let noise = [(); 3].map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng));
            agent.act(obs, &[], Some(noise))?
        };
        let tr = env.step(&action)?;
        buffer.push(tr);
        obs = if tr.done { env.reset(&mut rng) } else { tr.s_next };

        if step > cfg.warmup_steps && buffer.len() >= cfg.sac.batch_size {
            let trs = buffer.sample(cfg.sac.batch_size, &mut rng);
            let stats = agent.update(&agent.batch(&trs), no_z.view(), &mut rng)?;
            closs = stats.critic_loss;
            aloss = stats.actor_loss;
        }
        if cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.total_steps) {
            let (mean_return, success_rate) = evaluate(
                &agent,
                &mut eval_env,
                cfg.eval_episodes,
                !cfg.deterministic_eval,
                derive_seed(seed, &[2, step as u64]),
            )?;
            log.push(SacLogRow {
                step,
                mean_return,
                success_rate,
                critic_loss: closs,
                actor_loss: aloss,
            });
        }
    }
    Ok(SacTrainOutcome { agent, log })
}
