//! Meta-training over a task family: alternating data collection with prior
//! and posterior latents, and gradient steps on encoder, critics and actor.

use rand::seq::index::sample as sample_without_replacement;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{collect_rollout, infer_latents, latent_backward, ContextTuple, PearlAgent, PearlConfig};
use crate::env::{EnvConfig, InsertionEnv, RewardMode, TaskFamily, TaskParams, Transition};
use crate::nn::{adam_step, AdamConfig};
use crate::rng::{derive_seed, rng_from_seed, Rng};
use crate::sac::{ReplayBuffer, SacError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetaTrainConfig {
    pub num_tasks: usize,
    pub iterations: usize,
    /// Tasks visited by each collection phase.
    pub tasks_per_iteration: usize,
    /// Rollouts per visited task; the first uses the prior latent.
    pub rollouts_per_task: usize,
    /// Prior-latent rollouts per task before training starts.
    pub initial_rollouts: usize,
    pub train_steps_per_iteration: usize,
    /// Tasks per gradient step.
    pub meta_batch: usize,
    /// Context tuples per task per gradient step.
    pub context_size: usize,
}

impl Default for MetaTrainConfig {
    fn default() -> Self {
        Self {
            num_tasks: 50,
            iterations: 300,
            tasks_per_iteration: 10,
            rollouts_per_task: 3,
            initial_rollouts: 2,
            train_steps_per_iteration: 100,
            meta_batch: 8,
            context_size: 64,
        }
    }
}

impl MetaTrainConfig {
    pub fn validate(&self) -> Result<(), SacError> {
        if self.num_tasks < 2 {
            return Err(SacError::Config("meta-training needs at least two tasks".into()));
        }
        if self.meta_batch == 0 || self.context_size == 0 || self.rollouts_per_task == 0 {
            return Err(SacError::Config("meta batch, context size and rollouts must be positive".into()));
        }
        Ok(())
    }

    /// Environment steps the configuration will consume.
    pub fn env_steps(&self, horizon: usize) -> usize {
        horizon
            * (self.num_tasks * self.initial_rollouts
                + self.iterations * self.tasks_per_iteration.min(self.num_tasks) * self.rollouts_per_task)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStepStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub kl: f64,
    pub q_mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaTrainLogRow {
    pub iteration: usize,
    pub env_steps: usize,
    pub train_steps: usize,
    /// Success of the prior-latent rollouts in this collection phase.
    pub prior_success: f64,
    /// Success of the last posterior-latent rollouts in this phase.
    pub posterior_success: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub kl: f64,
}

pub struct MetaTrainOutcome {
    pub agent: PearlAgent,
    pub tasks: Vec<TaskParams>,
    pub log: Vec<MetaTrainLogRow>,
}

/// Training state: agent, task set and per-task buffers.
pub struct MetaTrainer {
    pub agent: PearlAgent,
    pub cfg: MetaTrainConfig,
    pub tasks: Vec<TaskParams>,
    envs: Vec<InsertionEnv>,
    replay: Vec<ReplayBuffer>,
    /// Data of each task's most recent collection phase.
    recent: Vec<Vec<Transition>>,
    rng: Rng,
    pub env_steps: usize,
    pub train_steps: usize,
}

impl MetaTrainer {
    pub fn new(
        family: &TaskFamily,
        env_cfg: &EnvConfig,
        pearl: PearlConfig,
        cfg: MetaTrainConfig,
        seed: u64,
    ) -> Result<Self, SacError> {
        cfg.validate()?;
        let tasks = (0..cfg.num_tasks)
            .map(|i| family.sample_task(derive_seed(seed, &[1, i as u64])))
            .collect::<Result<Vec<_>, _>>()?;
        Self::with_tasks(tasks, env_cfg, pearl, cfg, seed)
    }

    pub fn with_tasks(
        tasks: Vec<TaskParams>,
        env_cfg: &EnvConfig,
        pearl: PearlConfig,
        cfg: MetaTrainConfig,
        seed: u64,
    ) -> Result<Self, SacError> {
        let agent = PearlAgent::new(pearl, env_cfg.max_step, &mut rng_from_seed(derive_seed(seed, &[0])))?;
        let envs = tasks
            .iter()
            .map(|t| InsertionEnv::new(env_cfg.clone(), t.clone(), RewardMode::Dense))
            .collect::<Result<Vec<_>, _>>()?;
        let cap = agent.cfg.sac.buffer_capacity;
        Ok(Self {
            replay: (0..tasks.len()).map(|_| ReplayBuffer::new(cap)).collect(),
            recent: vec![Vec::new(); tasks.len()],
            envs,
            tasks,
            agent,
            cfg,
            rng: rng_from_seed(derive_seed(seed, &[2])),
            env_steps: 0,
            train_steps: 0,
        })
    }

    /// Runs `rollouts` episodes on task `i`, the first from the prior and
    /// later ones from the posterior of the phase's accumulated context.
    /// Returns the success flags.
    pub fn collect(&mut self, i: usize, rollouts: usize, resample_from_posterior: bool) -> Result<Vec<bool>, SacError> {
        self.recent[i].clear();
        let mut ctx: Vec<ContextTuple> = Vec::new();
        let mut flags = Vec::with_capacity(rollouts);
        for _ in 0..rollouts {
            let prior_ctx: &[ContextTuple] = if resample_from_posterior { &ctx } else { &[] };
            let (res, next_ctx, _) = collect_rollout(&self.agent, &mut self.envs[i], prior_ctx, true, &mut self.rng)?;
            ctx = next_ctx;
            self.env_steps += res.transitions.len();
            self.replay[i].extend(res.transitions.iter().copied());
            self.recent[i].extend(res.transitions.iter().copied());
            flags.push(res.success);
        }
        Ok(flags)
    }

    pub fn initial_collection(&mut self) -> Result<(), SacError> {
        for i in 0..self.tasks.len() {
            self.collect(i, self.cfg.initial_rollouts, false)?;
        }
        Ok(())
    }

    /// One gradient step on encoder, critics and actor over a meta-batch of tasks.
    pub fn train_step(&mut self) -> Result<TrainStepStats, SacError> {
        let ready: Vec<usize> = (0..self.tasks.len())
            .filter(|&i| !self.recent[i].is_empty() && !self.replay[i].is_empty())
            .collect();
        if ready.is_empty() {
            return Err(SacError::Underfilled {
                have: 0,
                need: self.agent.cfg.sac.batch_size,
            });
        }
        let mb = self.cfg.meta_batch.min(ready.len());
        let picked: Vec<usize> = sample_without_replacement(&mut self.rng, ready.len(), mb)
            .into_iter()
            .map(|k| ready[k])
            .collect();
        let b = self.agent.cfg.sac.batch_size;
        let c = self.cfg.context_size;
        let mut ctx = Vec::with_capacity(mb * c);
        let mut rl = Vec::with_capacity(mb * b);
        for &i in &picked {
            let recent = &self.recent[i];
            ctx.extend((0..c).map(|_| ContextTuple::from_transition(&recent[self.rng.random_range(0..recent.len())])));
            rl.extend(self.replay[i].sample(b, &mut self.rng));
        }
        let ctx_rows = self.agent.context_rows(&ctx);
        let dim = self.agent.cfg.latent_dim;
        let noise: Vec<Vec<f64>> = (0..mb)
            .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut self.rng)).collect())
            .collect();
        let lb = infer_latents(&self.agent.encoder, &self.agent.encoder_params, ctx_rows.view(), c, &noise)?;
        let z = lb.z_rows(b);
        let batch = self.agent.sac.batch(&rl).with_groups(mb);

        let critic = self.agent.sac.critic_phase(&batch, z.view(), &mut self.rng)?;
        let beta = self.agent.cfg.beta;
        latent_backward(
            &self.agent.encoder,
            &mut self.agent.encoder_params,
            &lb,
            &noise,
            critic.grad_z.view(),
            beta,
        )?;
        adam_step(&mut self.agent.encoder_params, &AdamConfig::with_lr(self.agent.cfg.encoder_lr))?;
        self.agent.sac.critic_optimizer_step()?;
        // the actor sees the latent as a constant input
        let actor = self.agent.sac.actor_phase(&batch, z.view(), &mut self.rng)?;
        let tau = self.agent.sac.cfg.tau;
        self.agent.sac.target_update(tau)?;
        self.train_steps += 1;
        let stats = TrainStepStats {
            critic_loss: critic.loss,
            actor_loss: actor.loss,
            kl: lb.kl(beta),
            q_mean: critic.q_mean,
        };
        if !(stats.critic_loss.is_finite() && stats.actor_loss.is_finite() && stats.kl.is_finite()) {
            return Err(SacError::Config(format!(
                "non-finite loss at train step {}: {stats:?}",
                self.train_steps
            )));
        }
        Ok(stats)
    }

    /// One collection phase followed by the configured number of train steps.
    pub fn iteration(&mut self, iteration: usize) -> Result<MetaTrainLogRow, SacError> {
        let n = self.tasks.len();
        let visit = self.cfg.tasks_per_iteration.min(n);
        let chosen: Vec<usize> = sample_without_replacement(&mut self.rng, n, visit).into_iter().collect();
        let (mut prior_ok, mut post_ok) = (0usize, 0usize);
        for &i in &chosen {
            let flags = self.collect(i, self.cfg.rollouts_per_task, true)?;
            prior_ok += flags[0] as usize;
            post_ok += *flags.last().expect("at least one rollout") as usize;
        }
        let mut acc = TrainStepStats::default();
        let steps = self.cfg.train_steps_per_iteration;
        for _ in 0..steps {
            let s = self.train_step()?;
            acc.critic_loss += s.critic_loss;
            acc.actor_loss += s.actor_loss;
            acc.kl += s.kl;
        }
        let k = steps.max(1) as f64;
        let v = visit.max(1) as f64;
        Ok(MetaTrainLogRow {
            iteration,
            env_steps: self.env_steps,
            train_steps: self.train_steps,
            prior_success: prior_ok as f64 / v,
            posterior_success: post_ok as f64 / v,
            critic_loss: acc.critic_loss / k,
            actor_loss: acc.actor_loss / k,
            kl: acc.kl / k,
        })
    }

    pub fn finish(self) -> (PearlAgent, Vec<TaskParams>) {
        (self.agent, self.tasks)
    }
}

/// Full meta-training run; `on_log` sees every iteration's diagnostics.
pub fn meta_train(
    family: &TaskFamily,
    env_cfg: &EnvConfig,
    pearl: PearlConfig,
    cfg: MetaTrainConfig,
    seed: u64,
    mut on_log: impl FnMut(&MetaTrainLogRow),
) -> Result<MetaTrainOutcome, SacError> {
    let iterations = cfg.iterations;
    let mut trainer = MetaTrainer::new(family, env_cfg, pearl, cfg, seed)?;
    trainer.initial_collection()?;
    let mut log = Vec::with_capacity(iterations);
    for it in 1..=iterations {
        let row = trainer.iteration(it)?;
        on_log(&row);
        log.push(row);
    }
    let (agent, tasks) = trainer.finish();
    Ok(MetaTrainOutcome { agent, tasks, log })
}
