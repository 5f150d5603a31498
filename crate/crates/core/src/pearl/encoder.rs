use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::LatentPosterior;
use crate::env::Transition;
use crate::nn::{Mlp, MlpSpec, MlpTape, NnError, ParamStore};
use crate::rng::Rng;

/// Smallest factor variance the encoder can emit.
pub const VAR_FLOOR: f64 = 1e-6;

/// Width of an encoded context tuple: s, a, r, s'.
pub const CONTEXT_WIDTH: usize = 10;

/// One `(s, a, r, s')` tuple in environment units. The reward is the sparse
/// success indicator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextTuple {
    pub s: [f64; 3],
    pub a: [f64; 3],
    pub r: f64,
    pub s_next: [f64; 3],
}

pub type ContextBatch = Vec<ContextTuple>;

impl ContextTuple {
    pub fn from_transition(tr: &Transition) -> Self {
        Self {
            s: tr.s,
            a: tr.a,
            r: if tr.success { 1.0 } else { 0.0 },
            s_next: tr.s_next,
        }
    }

    pub fn row(&self, obs_scale: f64, max_step: f64) -> [f64; CONTEXT_WIDTH] {
        let mut out = [0.0; CONTEXT_WIDTH];
        for j in 0..3 {
            out[j] = self.s[j] / obs_scale;
            out[3 + j] = self.a[j] / max_step;
            out[7 + j] = self.s_next[j] / obs_scale;
        }
        out[6] = self.r;
        out
    }
}

pub fn context_rows(ctx: &[ContextTuple], obs_scale: f64, max_step: f64) -> Array2<f64> {
    let mut m = Array2::zeros((ctx.len(), CONTEXT_WIDTH));
    for (i, c) in ctx.iter().enumerate() {
        m.row_mut(i).assign(&ndarray::ArrayView1::from(&c.row(obs_scale, max_step)));
    }
    m
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Maps each context tuple to a Gaussian factor `(mu_n, sigma_n^2)` with
/// `sigma_n^2 = max(softplus(raw), VAR_FLOOR)`.
#[derive(Clone, Debug)]
pub struct ContextEncoder {
    pub mlp: Mlp,
    pub latent_dim: usize,
}

/// Factors of a batch of tuples plus what the reverse pass needs.
#[derive(Clone, Debug)]
pub struct EncodedFactors {
    pub means: Array2<f64>,
    pub vars: Array2<f64>,
    raw_var: Array2<f64>,
    tape: MlpTape,
}

impl ContextEncoder {
    pub fn describe(latent_dim: usize, hidden: &[usize]) -> Result<Self, NnError> {
        Ok(Self {
            mlp: Mlp::describe(MlpSpec::new(CONTEXT_WIDTH, hidden, 2 * latent_dim), "encoder")?,
            latent_dim,
        })
    }

    pub fn init(latent_dim: usize, hidden: &[usize], store: &mut ParamStore, rng: &mut Rng) -> Result<Self, NnError> {
        let enc = Self::describe(latent_dim, hidden)?;
        Mlp::init(enc.mlp.spec.clone(), "encoder", store, rng)?;
        Ok(enc)
    }

    pub fn factors(&self, store: &ParamStore, rows: ArrayView2<f64>) -> Result<EncodedFactors, NnError> {
        let l = self.latent_dim;
        let (out, tape) = self.mlp.forward(store, rows)?;
        let means = out.slice(s![.., ..l]).to_owned();
        let raw_var = out.slice(s![.., l..]).to_owned();
        let vars = raw_var.mapv(|x| softplus(x).max(VAR_FLOOR));
        if !means.iter().chain(vars.iter()).all(|v| v.is_finite()) {
            return Err(NnError::NonFinite("encoder output".into()));
        }
        Ok(EncodedFactors {
            means,
            vars,
            raw_var,
            tape,
        })
    }

    /// Posterior over the latent given `rows` (empty rows give the prior).
    pub fn posterior(&self, store: &ParamStore, rows: ArrayView2<f64>) -> Result<LatentPosterior, NnError> {
        if rows.nrows() == 0 {
            return Ok(LatentPosterior::prior(self.latent_dim));
        }
        let f = self.factors(store, rows)?;
        Ok(LatentPosterior::product(f.means.view(), f.vars.view(), true))
    }

    /// Accumulates encoder gradients from gradients on factor means/variances.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        f: &EncodedFactors,
        grad_means: ArrayView2<f64>,
        grad_vars: ArrayView2<f64>,
    ) -> Result<(), NnError> {
        let mut g_raw = grad_vars.to_owned();
        g_raw.zip_mut_with(&f.raw_var, |g, &x| {
            *g = if softplus(x) > VAR_FLOOR { *g * sigmoid(x) } else { 0.0 }
        });
        let g = concatenate(Axis(1), &[grad_means, g_raw.view()]).expect("same rows");
        self.mlp.backward(store, &f.tape, g.view())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn tuple_row_layout() {
        let c = ContextTuple {
            s: [1e-3, 2e-3, 5e-3],
            a: [2e-3, 0.0, -1e-3],
            r: 1.0,
            s_next: [0.0, 0.0, -5e-3],
        };
        let r = c.row(5e-3, 2e-3);
        assert_eq!(r, [0.2, 0.4, 1.0, 1.0, 0.0, -0.5, 1.0, 0.0, 0.0, -1.0]);
    }
}
