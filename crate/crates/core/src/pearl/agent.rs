use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{context_rows, ContextBatch, ContextEncoder, ContextTuple, LatentPosterior, PearlConfig};
use crate::env::{run_episode, EpisodeResult, InsertionEnv};
use crate::nn::{Checkpoint, NnError, ParamStore};
use crate::rng::Rng;
use crate::sac::{SacAgent, SacError, SacPolicy};

/// Encoder plus latent-conditioned actor-critic.
#[derive(Clone, Debug)]
pub struct PearlAgent {
    pub cfg: PearlConfig,
    pub encoder: ContextEncoder,
    pub encoder_params: ParamStore,
    pub sac: SacAgent,
}

impl PearlAgent {
    pub fn new(cfg: PearlConfig, max_step: f64, rng: &mut Rng) -> Result<Self, SacError> {
        cfg.validate()?;
        let mut encoder_params = ParamStore::new();
        let encoder = ContextEncoder::init(cfg.latent_dim, &cfg.encoder_hidden, &mut encoder_params, rng)?;
        let sac = SacAgent::new(cfg.sac.clone(), cfg.latent_dim, max_step, rng)?;
        Ok(Self {
            cfg,
            encoder,
            encoder_params,
            sac,
        })
    }

    pub fn context_rows(&self, ctx: &[ContextTuple]) -> ndarray::Array2<f64> {
        context_rows(ctx, self.sac.cfg.obs_scale, self.sac.max_step)
    }

    pub fn encode_posterior(&self, ctx: &[ContextTuple]) -> Result<LatentPosterior, NnError> {
        self.encoder
            .posterior(&self.encoder_params, self.context_rows(ctx).view())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.set_meta("kind", "pearl");
        ck.set_meta("config", &self.cfg);
        ck.set_meta("max_step", self.sac.max_step);
        ck.add_group("encoder", &self.encoder_params);
        ck.add_group("actor", &self.sac.actor);
        ck.add_group("critic", &self.sac.critic);
        ck.add_group("target", &self.sac.target);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, SacError> {
        let kind: String = ck.meta("kind")?;
        if kind != "pearl" {
            return Err(SacError::Config(format!("checkpoint holds a `{kind}` agent, not pearl")));
        }
        let cfg: PearlConfig = ck.meta("config")?;
        let max_step: f64 = ck.meta("max_step")?;
        let encoder = ContextEncoder::describe(cfg.latent_dim, &cfg.encoder_hidden)?;
        let encoder_params = ck.group("encoder")?;
        for name in encoder.mlp.param_names() {
            encoder_params.get(name)?;
        }
        let sac = SacAgent::from_parts(
            cfg.sac.clone(),
            cfg.latent_dim,
            max_step,
            ck.group("actor")?,
            ck.group("critic")?,
            ck.group("target")?,
        )?;
        Ok(Self {
            cfg,
            encoder,
            encoder_params,
            sac,
        })
    }
}

/// Samples one latent from the posterior of `context`, runs a full episode
/// conditioned on it and returns the episode together with the extended
/// context.
pub fn collect_rollout(
    agent: &PearlAgent,
    env: &mut InsertionEnv,
    context: &[ContextTuple],
    stochastic: bool,
    rng: &mut Rng,
) -> Result<(EpisodeResult, ContextBatch, LatentPosterior), SacError> {
    let post = agent.encode_posterior(context)?;
    let noise: Vec<f64> = (0..post.dim()).map(|_| StandardNormal.sample(rng)).collect();
    let z = post.sample(&noise);
    let mut policy = SacPolicy {
        agent: &agent.sac,
        z,
        stochastic,
    };
    let res = run_episode(env, &mut policy, rng)?;
    let mut ctx = context.to_vec();
    ctx.extend(res.transitions.iter().map(ContextTuple::from_transition));
    Ok((res, ctx, post))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub success: bool,
    pub insertion_steps: Option<usize>,
    pub cumulative_success_rate: f64,
    /// Norms of the posterior the trial's latent was drawn from.
    pub posterior_mean_norm: f64,
    pub posterior_var_norm: f64,
}

#[derive(Clone, Debug)]
pub struct AdaptationResult {
    pub context: ContextBatch,
    pub trials: Vec<TrialRecord>,
    pub episodes: Vec<EpisodeResult>,
}

/// Inference-only adaptation: `trials` rollouts, each with a latent resampled
/// from the posterior over all context gathered so far.
pub fn adapt(
    agent: &PearlAgent,
    env: &mut InsertionEnv,
    trials: usize,
    stochastic: bool,
    rng: &mut Rng,
) -> Result<AdaptationResult, SacError> {
    let mut context = ContextBatch::new();
    let mut records = Vec::with_capacity(trials);
    let mut episodes = Vec::with_capacity(trials);
    let mut successes = 0usize;
    for k in 0..trials {
        let (res, ctx, post) = collect_rollout(agent, env, &context, stochastic, rng)?;
        context = ctx;
        successes += res.success as usize;
        records.push(TrialRecord {
            trial_index: k + 1,
            success: res.success,
            insertion_steps: res.insertion_steps,
            cumulative_success_rate: successes as f64 / (k + 1) as f64,
            posterior_mean_norm: post.mean_norm(),
            posterior_var_norm: post.var_norm(),
        });
        episodes.push(res);
    }
    Ok(AdaptationResult {
        context,
        trials: records,
        episodes,
    })
}
