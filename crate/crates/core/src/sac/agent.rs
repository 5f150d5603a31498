use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};

use super::{SacConfig, SacError};
use crate::env::{Action, InsertionPolicy, Transition};
use crate::nn::{
    adam_step, deterministic_action, gaussian_sample, gaussian_sample_backward, AdamConfig, Checkpoint,
    GaussianHeadOutput, Mlp, MlpSpec, MlpTape, ParamStore,
};
use crate::rng::Rng;

/// Network-space minibatch: normalized observations and actions, scaled rewards.
#[derive(Clone, Debug)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub act: Array2<f64>,
    pub reward: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Array1<f64>,
    /// Number of equally sized task groups concatenated in this batch. Losses
    /// are the sum over groups of the per-group mean.
    pub groups: usize,
}

impl Batch {
    pub fn from_transitions(trs: &[Transition], obs_scale: f64, max_step: f64, reward_scale: f64) -> Self {
        let n = trs.len();
        let obs = Array2::from_shape_fn((n, 3), |(i, j)| trs[i].s[j] / obs_scale);
        let act = Array2::from_shape_fn((n, 3), |(i, j)| trs[i].a[j] / max_step);
        let next_obs = Array2::from_shape_fn((n, 3), |(i, j)| trs[i].s_next[j] / obs_scale);
        let reward = trs.iter().map(|t| t.r * reward_scale).collect();
        // the horizon truncates episodes but no state is terminal, so every
        // target bootstraps
        let done = Array1::zeros(n);
        Self {
            obs,
            act,
            reward,
            next_obs,
            done,
            groups: 1,
        }
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.nrows() == 0
    }

    fn row_weight(&self) -> f64 {
        self.groups as f64 / self.len() as f64
    }
}

fn hcat(parts: &[ArrayView2<f64>]) -> Array2<f64> {
    concatenate(Axis(1), parts).expect("row counts agree")
}

pub fn standard_normal(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

/// Architecture of the policy and the twin critics. Parameters live in
/// separate stores so each has its own optimizer state.
#[derive(Clone, Debug)]
pub struct SacNets {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub latent_dim: usize,
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
}

#[derive(Clone, Debug)]
pub struct CriticStep {
    pub loss: f64,
    pub q_mean: f64,
    /// Loss gradient with respect to the latent columns of the critic input.
    pub grad_z: Array2<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ActorStep {
    pub loss: f64,
    pub log_prob_mean: f64,
}

impl SacNets {
    pub fn describe(obs_dim: usize, action_dim: usize, latent_dim: usize, hidden: &[usize]) -> Result<Self, SacError> {
        Ok(Self {
            obs_dim,
            action_dim,
            latent_dim,
            actor: Mlp::describe(MlpSpec::new(obs_dim + latent_dim, hidden, 2 * action_dim), "actor")?,
            q1: Mlp::describe(MlpSpec::new(obs_dim + action_dim + latent_dim, hidden, 1), "q1")?,
            q2: Mlp::describe(MlpSpec::new(obs_dim + action_dim + latent_dim, hidden, 1), "q2")?,
        })
    }

    /// Returns the description together with freshly initialized actor and
    /// critic stores.
    pub fn init(
        obs_dim: usize,
        action_dim: usize,
        latent_dim: usize,
        hidden: &[usize],
        rng: &mut Rng,
    ) -> Result<(Self, ParamStore, ParamStore), SacError> {
        let nets = Self::describe(obs_dim, action_dim, latent_dim, hidden)?;
        let mut actor = ParamStore::new();
        let mut critic = ParamStore::new();
        Mlp::init(nets.actor.spec.clone(), "actor", &mut actor, rng)?;
        Mlp::init(nets.q1.spec.clone(), "q1", &mut critic, rng)?;
        Mlp::init(nets.q2.spec.clone(), "q2", &mut critic, rng)?;
        Ok((nets, actor, critic))
    }

    pub fn policy_head(
        &self,
        actor: &ParamStore,
        obs: ArrayView2<f64>,
        z: ArrayView2<f64>,
    ) -> Result<(GaussianHeadOutput, MlpTape), SacError> {
        let x = hcat(&[obs, z]);
        let (out, tape) = self.actor.forward(actor, x.view())?;
        Ok((GaussianHeadOutput::from_network(out.view(), self.action_dim)?, tape))
    }

    fn twin_q(
        &self,
        critic: &ParamStore,
        obs: ArrayView2<f64>,
        act: ArrayView2<f64>,
        z: ArrayView2<f64>,
    ) -> Result<((Array2<f64>, MlpTape), (Array2<f64>, MlpTape)), SacError> {
        let x = hcat(&[obs, act, z]);
        Ok((self.q1.forward(critic, x.view())?, self.q2.forward(critic, x.view())?))
    }

    /// `r + gamma (1 - done) (min_j Qtarg_j(s', a') - alpha log pi(a'|s'))` with
    /// `a'` drawn from the current policy using `noise`.
    pub fn bellman_targets(
        &self,
        actor: &ParamStore,
        target: &ParamStore,
        batch: &Batch,
        z: ArrayView2<f64>,
        noise: ArrayView2<f64>,
        cfg: &SacConfig,
    ) -> Result<Array1<f64>, SacError> {
        let (head, _) = self.policy_head(actor, batch.next_obs.view(), z)?;
        let smp = gaussian_sample(&head, noise, 1.0)?;
        let ((q1, _), (q2, _)) = self.twin_q(target, batch.next_obs.view(), smp.action.view(), z)?;
        let mut y = Array1::zeros(batch.len());
        for i in 0..batch.len() {
            let soft_v = q1[[i, 0]].min(q2[[i, 0]]) - cfg.alpha * smp.log_prob[i];
            y[i] = batch.reward[i] + cfg.gamma * (1.0 - batch.done[i]) * soft_v;
            if !y[i].is_finite() {
                return Err(SacError::NonFiniteTarget(i));
            }
        }
        Ok(y)
    }

    /// Sum of the two critics' mean squared Bellman errors.
    pub fn critic_loss(
        &self,
        critic: &ParamStore,
        batch: &Batch,
        z: ArrayView2<f64>,
        y: &Array1<f64>,
    ) -> Result<f64, SacError> {
        let ((q1, _), (q2, _)) = self.twin_q(critic, batch.obs.view(), batch.act.view(), z)?;
        let w = batch.row_weight();
        Ok((0..batch.len())
            .map(|i| w * ((q1[[i, 0]] - y[i]).powi(2) + (q2[[i, 0]] - y[i]).powi(2)))
            .sum())
    }

    /// Accumulates critic gradients and returns the gradient reaching `z`.
    pub fn critic_backward(
        &self,
        critic: &mut ParamStore,
        batch: &Batch,
        z: ArrayView2<f64>,
        y: &Array1<f64>,
    ) -> Result<CriticStep, SacError> {
        let ((q1, t1), (q2, t2)) = self.twin_q(critic, batch.obs.view(), batch.act.view(), z)?;
        let w = batch.row_weight();
        let n = batch.len();
        let mut g1 = Array2::zeros((n, 1));
        let mut g2 = Array2::zeros((n, 1));
        let mut loss = 0.0;
        for i in 0..n {
            let (e1, e2) = (q1[[i, 0]] - y[i], q2[[i, 0]] - y[i]);
            loss += w * (e1 * e1 + e2 * e2);
            g1[[i, 0]] = 2.0 * w * e1;
            g2[[i, 0]] = 2.0 * w * e2;
        }
        let gx1 = self.q1.backward(critic, &t1, g1.view())?;
        let gx2 = self.q2.backward(critic, &t2, g2.view())?;
        let zc = self.obs_dim + self.action_dim;
        let grad_z = &gx1.slice(s![.., zc..]) + &gx2.slice(s![.., zc..]);
        Ok(CriticStep {
            loss,
            q_mean: 0.5 * (q1.sum() + q2.sum()) / n as f64,
            grad_z,
        })
    }

    /// `alpha log pi(a~|s) - min_j Q_j(s, a~)` averaged per group, with
    /// `a~` reparameterized through `noise`.
    pub fn actor_loss(
        &self,
        actor: &ParamStore,
        critic: &ParamStore,
        obs: ArrayView2<f64>,
        z: ArrayView2<f64>,
        noise: ArrayView2<f64>,
        alpha: f64,
        groups: usize,
    ) -> Result<f64, SacError> {
        let (head, _) = self.policy_head(actor, obs, z)?;
        let smp = gaussian_sample(&head, noise, 1.0)?;
        let ((q1, _), (q2, _)) = self.twin_q(critic, obs, smp.action.view(), z)?;
        let w = groups as f64 / obs.nrows() as f64;
        Ok((0..obs.nrows())
            .map(|i| w * (alpha * smp.log_prob[i] - q1[[i, 0]].min(q2[[i, 0]])))
            .sum())
    }

    /// Accumulates actor gradients only; critics and `z` are fixed inputs.
    #[allow(clippy::too_many_arguments)]
    pub fn actor_backward(
        &self,
        actor: &mut ParamStore,
        critic: &ParamStore,
        obs: ArrayView2<f64>,
        z: ArrayView2<f64>,
        noise: ArrayView2<f64>,
        alpha: f64,
        groups: usize,
    ) -> Result<ActorStep, SacError> {
        let (head, tape) = self.policy_head(actor, obs, z)?;
        let smp = gaussian_sample(&head, noise, 1.0)?;
        let ((q1, t1), (q2, t2)) = self.twin_q(critic, obs, smp.action.view(), z)?;
        let n = obs.nrows();
        let w = groups as f64 / n as f64;
        let mut g1 = Array2::zeros((n, 1));
        let mut g2 = Array2::zeros((n, 1));
        let mut loss = 0.0;
        for i in 0..n {
            let (a, b) = (q1[[i, 0]], q2[[i, 0]]);
            loss += w * (alpha * smp.log_prob[i] - a.min(b));
            if a <= b {
                g1[[i, 0]] = -w;
            } else {
                g2[[i, 0]] = -w;
            }
        }
        let gx = self.q1.input_grad(critic, &t1, g1.view())? + self.q2.input_grad(critic, &t2, g2.view())?;
        let grad_a = gx.slice(s![.., self.obs_dim..self.obs_dim + self.action_dim]);
        let grad_lp = Array1::from_elem(n, alpha * w);
        let g_head = gaussian_sample_backward(&head, &smp, noise, Some(grad_a), grad_lp.view(), 1.0);
        self.actor.backward(actor, &tape, g_head.view())?;
        Ok(ActorStep {
            loss,
            log_prob_mean: smp.log_prob.mean().unwrap_or(0.0),
        })
    }
}

/// Diagnostics of one gradient update.
#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub q_mean: f64,
    pub log_prob_mean: f64,
}

/// Networks, parameters and optimizer settings of one SAC learner.
#[derive(Clone, Debug)]
pub struct SacAgent {
    pub cfg: SacConfig,
    pub nets: SacNets,
    pub actor: ParamStore,
    pub critic: ParamStore,
    /// Slow-moving copies of the critics, under the same parameter names.
    pub target: ParamStore,
    /// Environment action bound; network actions live in [-1, 1].
    pub max_step: f64,
}

impl SacAgent {
    pub fn new(cfg: SacConfig, latent_dim: usize, max_step: f64, rng: &mut Rng) -> Result<Self, SacError> {
        cfg.validate()?;
        let (nets, actor, critic) = SacNets::init(3, 3, latent_dim, &cfg.hidden, rng)?;
        let target = critic.values_only();
        Ok(Self {
            cfg,
            nets,
            actor,
            critic,
            target,
            max_step,
        })
    }

    /// Rebuilds an agent from stored parameters.
    pub fn from_parts(
        cfg: SacConfig,
        latent_dim: usize,
        max_step: f64,
        actor: ParamStore,
        critic: ParamStore,
        target: ParamStore,
    ) -> Result<Self, SacError> {
        cfg.validate()?;
        let nets = SacNets::describe(3, 3, latent_dim, &cfg.hidden)?;
        for (mlp, store) in [(&nets.actor, &actor), (&nets.q1, &critic), (&nets.q2, &critic), (&nets.q1, &target)] {
            for name in mlp.param_names() {
                store.get(name)?;
            }
        }
        Ok(Self {
            cfg,
            nets,
            actor,
            critic,
            target,
            max_step,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set_meta("kind", "sac");
        ck.set_meta("config", &self.cfg);
        ck.set_meta("latent_dim", self.latent_dim());
        ck.set_meta("max_step", self.max_step);
        ck.add_group("actor", &self.actor);
        ck.add_group("critic", &self.critic);
        ck.add_group("target", &self.target);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, SacError> {
        let kind: String = ck.meta("kind")?;
        if kind != "sac" {
            return Err(SacError::Config(format!("checkpoint holds a `{kind}` agent, not sac")));
        }
        Self::from_parts(
            ck.meta("config")?,
            ck.meta("latent_dim")?,
            ck.meta("max_step")?,
            ck.group("actor")?,
            ck.group("critic")?,
            ck.group("target")?,
        )
    }

    pub fn latent_dim(&self) -> usize {
        self.nets.latent_dim
    }

    pub fn batch(&self, trs: &[Transition]) -> Batch {
        Batch::from_transitions(trs, self.cfg.obs_scale, self.max_step, self.cfg.reward_scale)
    }

    /// Environment action for one observation. `noise = None` selects the
    /// squashed mean.
    pub fn act(&self, obs: [f64; 3], z: &[f64], noise: Option<[f64; 3]>) -> Result<Action, SacError> {
        let o = Array2::from_shape_fn((1, 3), |(_, j)| obs[j] / self.cfg.obs_scale);
        let zz = Array2::from_shape_vec((1, z.len()), z.to_vec()).map_err(|e| SacError::Config(e.to_string()))?;
        let (head, _) = self.nets.policy_head(&self.actor, o.view(), zz.view())?;
        let a = match noise {
            Some(e) => {
                let e = Array2::from_shape_fn((1, 3), |(_, j)| e[j]);
                gaussian_sample(&head, e.view(), 1.0)?.action
            }
            None => deterministic_action(&head, 1.0),
        };
        Ok(Action::new(
            a[[0, 0]] * self.max_step,
            a[[0, 1]] * self.max_step,
            a[[0, 2]] * self.max_step,
        ))
    }

    /// Critic gradients for `batch`, without an optimizer step.
    pub fn critic_phase(&mut self, batch: &Batch, z: ArrayView2<f64>, rng: &mut Rng) -> Result<CriticStep, SacError> {
        let noise = standard_normal(batch.len(), self.nets.action_dim, rng);
        let y = self
            .nets
            .bellman_targets(&self.actor, &self.target, batch, z, noise.view(), &self.cfg)?;
        self.nets.critic_backward(&mut self.critic, batch, z, &y)
    }

    pub fn critic_optimizer_step(&mut self) -> Result<(), SacError> {
        adam_step(&mut self.critic, &AdamConfig::with_lr(self.cfg.critic_lr))?;
        Ok(())
    }

    /// Actor gradient and optimizer step.
    pub fn actor_phase(&mut self, batch: &Batch, z: ArrayView2<f64>, rng: &mut Rng) -> Result<ActorStep, SacError> {
        let noise = standard_normal(batch.len(), self.nets.action_dim, rng);
        let st = self.nets.actor_backward(
            &mut self.actor,
            &self.critic,
            batch.obs.view(),
            z,
            noise.view(),
            self.cfg.alpha,
            batch.groups,
        )?;
        adam_step(&mut self.actor, &AdamConfig::with_lr(self.cfg.actor_lr))?;
        Ok(st)
    }

    /// `target <- tau * critic + (1 - tau) * target`.
    pub fn target_update(&mut self, tau: f64) -> Result<(), SacError> {
        self.target.soft_update_from(&self.critic, tau)?;
        Ok(())
    }

    /// One full update (critic, actor, targets) with a fixed latent input.
    pub fn update(&mut self, batch: &Batch, z: ArrayView2<f64>, rng: &mut Rng) -> Result<UpdateStats, SacError> {
        let c = self.critic_phase(batch, z, rng)?;
        self.critic_optimizer_step()?;
        let a = self.actor_phase(batch, z, rng)?;
        self.target_update(self.cfg.tau)?;
        Ok(UpdateStats {
            critic_loss: c.loss,
            actor_loss: a.loss,
            q_mean: c.q_mean,
            log_prob_mean: a.log_prob_mean,
        })
    }
}

/// Runs a [`SacAgent`] with a fixed latent vector.
pub struct SacPolicy<'a> {
    pub agent: &'a SacAgent,
    pub z: Vec<f64>,
    pub stochastic: bool,
}

impl InsertionPolicy for SacPolicy<'_> {
    fn act(&mut self, obs: [f64; 3], rng: &mut Rng) -> Action {
        let noise = self
            .stochastic
            .then(|| [(); 3].map(|_| StandardNormal.sample(rng)));
        self.agent
            .act(obs, &self.z, noise)
            .expect("policy dimensions fixed at construction")
    }
}
