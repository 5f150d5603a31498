//! Latent inference for a meta-batch of tasks and its reverse pass.

use ndarray::{s, Array2, ArrayView2};

use super::{ContextEncoder, EncodedFactors, LatentPosterior};
use crate::nn::{NnError, ParamStore};

/// Per-task posteriors and samples for `tasks` equally sized context groups.
#[derive(Clone, Debug)]
pub struct LatentBatch {
    pub factors: EncodedFactors,
    pub posteriors: Vec<LatentPosterior>,
    pub z: Vec<Vec<f64>>,
    pub ctx_per_task: usize,
}

/// Encodes `ctx_rows` (task-major, `ctx_per_task` rows each) and samples one
/// latent per task with the given standard-normal `noise`.
pub fn infer_latents(
    encoder: &ContextEncoder,
    store: &ParamStore,
    ctx_rows: ArrayView2<f64>,
    ctx_per_task: usize,
    noise: &[Vec<f64>],
) -> Result<LatentBatch, NnError> {
    let tasks = noise.len();
    if ctx_rows.nrows() != tasks * ctx_per_task {
        return Err(NnError::Dimension {
            expected: tasks * ctx_per_task,
            got: ctx_rows.nrows(),
        });
    }
    let factors = encoder.factors(store, ctx_rows)?;
    let mut posteriors = Vec::with_capacity(tasks);
    let mut z = Vec::with_capacity(tasks);
    for (t, eps) in noise.iter().enumerate() {
        let r = t * ctx_per_task..(t + 1) * ctx_per_task;
        let post = LatentPosterior::product(
            factors.means.slice(s![r.clone(), ..]),
            factors.vars.slice(s![r, ..]),
            true,
        );
        z.push(post.sample(eps));
        posteriors.push(post);
    }
    Ok(LatentBatch {
        factors,
        posteriors,
        z,
        ctx_per_task,
    })
}

impl LatentBatch {
    /// Latents repeated `rows_per_task` times, task-major.
    pub fn z_rows(&self, rows_per_task: usize) -> Array2<f64> {
        let dim = self.z.first().map_or(0, Vec::len);
        Array2::from_shape_fn((self.z.len() * rows_per_task, dim), |(i, d)| self.z[i / rows_per_task][d])
    }

    /// `beta * sum_t KL(q_t || N(0, I))`.
    pub fn kl(&self, beta: f64) -> f64 {
        self.posteriors.iter().map(|p| p.kl_to_prior(beta)).sum()
    }
}

/// Accumulates into `store` the encoder gradient of
/// `L(z_rows) + beta * sum_t KL_t`, given `dL/dz_rows`.
pub fn latent_backward(
    encoder: &ContextEncoder,
    store: &mut ParamStore,
    lb: &LatentBatch,
    noise: &[Vec<f64>],
    grad_z_rows: ArrayView2<f64>,
    beta: f64,
) -> Result<(), NnError> {
    let tasks = lb.posteriors.len();
    let rows_per_task = grad_z_rows.nrows() / tasks.max(1);
    let dim = encoder.latent_dim;
    let n = lb.factors.means.nrows();
    let mut gm = Array2::zeros((n, dim));
    let mut gv = Array2::zeros((n, dim));
    for (t, post) in lb.posteriors.iter().enumerate() {
        let mut gz = vec![0.0; dim];
        for row in grad_z_rows.slice(s![t * rows_per_task..(t + 1) * rows_per_task, ..]).outer_iter() {
            for d in 0..dim {
                gz[d] += row[d];
            }
        }
        let (mut dm, mut dv) = post.sample_backward(&noise[t], &gz);
        let (km, kv) = post.kl_grad(beta);
        for d in 0..dim {
            dm[d] += km[d];
            dv[d] += kv[d];
        }
        let r = t * lb.ctx_per_task..(t + 1) * lb.ctx_per_task;
        let (fm, fv) = super::posterior::product_backward(
            lb.factors.means.slice(s![r.clone(), ..]),
            lb.factors.vars.slice(s![r.clone(), ..]),
            post,
            &dm,
            &dv,
        );
        gm.slice_mut(s![r.clone(), ..]).assign(&fm);
        gv.slice_mut(s![r, ..]).assign(&fv);
    }
    encoder.backward(store, &lb.factors, gm.view(), gv.view())
}
