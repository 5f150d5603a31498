use ndarray::{Array1, Array2};
use rand::Rng as _;

use super::BenchError;
use crate::nn::{grad_check, GradCheckConfig, GradCheckReport, ParamStore};
use crate::pearl::{infer_latents, latent_backward, ContextEncoder, CONTEXT_WIDTH};
use crate::rng::{rng_from_seed, Rng};
use crate::sac::{standard_normal, Batch, SacConfig, SacNets};

const HIDDEN: [usize; 2] = [8, 8];
const LATENT: usize = 2;
const TASKS: usize = 2;
const ROWS_PER_TASK: usize = 4;
const CTX_PER_TASK: usize = 5;

fn random_batch(rng: &mut Rng) -> Batch {
    let n = TASKS * ROWS_PER_TASK;
    let mut uniform = |rows: usize, cols: usize| Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0));
    let obs = uniform(n, 3);
    let act = uniform(n, 3);
    let next_obs = uniform(n, 3);
    let reward = uniform(n, 1).column(0).to_owned();
    let done = Array1::from_shape_fn(n, |i| (i % 3 == 0) as u8 as f64);
    Batch {
        obs,
        act,
        reward,
        next_obs,
        done,
        groups: TASKS,
    }
}

/// Reverse-mode versus finite-difference gradients of the critic, actor,
/// encoder (through the critic loss and the KL term) and KL-only losses on
/// small random networks.
pub fn run_gradient_checks(seed: u64, cfg: &GradCheckConfig) -> Result<Vec<(String, GradCheckReport)>, BenchError> {
    let mut rng = rng_from_seed(seed);
    let sac = SacConfig::default();
    let beta = 0.7;
    let (nets, actor, mut critic) = SacNets::init(3, 3, LATENT, &HIDDEN, &mut rng)?;
    let target = critic.values_only();
    let mut enc_store = ParamStore::new();
    let encoder = ContextEncoder::init(LATENT, &HIDDEN, &mut enc_store, &mut rng)?;

    let batch = random_batch(&mut rng);
    let n = batch.len();
    let ctx = Array2::from_shape_fn((TASKS * CTX_PER_TASK, CONTEXT_WIDTH), |_| rng.random_range(-1.0..1.0));
    let z_noise: Vec<Vec<f64>> = (0..TASKS).map(|_| standard_normal(1, LATENT, &mut rng).into_raw_vec_and_offset().0).collect();
    let a_noise = standard_normal(n, 3, &mut rng);
    let t_noise = standard_normal(n, 3, &mut rng);

    let lb = infer_latents(&encoder, &enc_store, ctx.view(), CTX_PER_TASK, &z_noise)?;
    let z = lb.z_rows(ROWS_PER_TASK);
    let y = nets.bellman_targets(&actor, &target, &batch, z.view(), t_noise.view(), &sac)?;
    let mut reports = Vec::new();

    // critic
    critic.zero_grad();
    nets.critic_backward(&mut critic, &batch, z.view(), &y)?;
    let r = grad_check(
        &mut critic,
        |c| nets.critic_loss(c, &batch, z.view(), &y).expect("shapes fixed"),
        cfg,
    );
    reports.push(("critic".to_string(), r));

    // actor
    let mut actor_s = actor.clone();
    actor_s.zero_grad();
    nets.actor_backward(&mut actor_s, &critic, batch.obs.view(), z.view(), a_noise.view(), sac.alpha, TASKS)?;
    let r = grad_check(
        &mut actor_s,
        |a| {
            nets.actor_loss(a, &critic, batch.obs.view(), z.view(), a_noise.view(), sac.alpha, TASKS)
                .expect("shapes fixed")
        },
        cfg,
    );
    reports.push(("actor".to_string(), r));

    // encoder through the critic loss plus KL
    let mut enc_s = enc_store.clone();
    enc_s.zero_grad();
    let mut scratch = critic.clone();
    let step = nets.critic_backward(&mut scratch, &batch, z.view(), &y)?;
    latent_backward(&encoder, &mut enc_s, &lb, &z_noise, step.grad_z.view(), beta)?;
    let r = grad_check(
        &mut enc_s,
        |e| {
            let lb = infer_latents(&encoder, e, ctx.view(), CTX_PER_TASK, &z_noise).expect("shapes fixed");
            let z = lb.z_rows(ROWS_PER_TASK);
            nets.critic_loss(&critic, &batch, z.view(), &y).expect("shapes fixed") + lb.kl(beta)
        },
        cfg,
    );
    reports.push(("encoder".to_string(), r));

    // KL alone
    let mut enc_k = enc_store.clone();
    enc_k.zero_grad();
    latent_backward(&encoder, &mut enc_k, &lb, &z_noise, Array2::zeros(z.dim()).view(), beta)?;
    let r = grad_check(
        &mut enc_k,
        |e| {
            infer_latents(&encoder, e, ctx.view(), CTX_PER_TASK, &z_noise)
                .expect("shapes fixed")
                .kl(beta)
        },
        cfg,
    );
    reports.push(("kl".to_string(), r));
    Ok(reports)
}
