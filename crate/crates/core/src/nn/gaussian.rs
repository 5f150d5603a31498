//! Diagonal Gaussian policy head with tanh squashing.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};

use super::NnError;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Largest |tanh| emitted, keeping actions strictly inside the bound.
const TANH_LIMIT: f64 = 1.0 - 1e-12;

fn squash(u: f64) -> f64 {
    u.tanh().clamp(-TANH_LIMIT, TANH_LIMIT)
}

/// Mean and clamped log standard deviation for a batch of rows.
#[derive(Clone, Debug)]
pub struct GaussianHeadOutput {
    pub mean: Array2<f64>,
    pub log_std: Array2<f64>,
    /// Whether the raw log-std was inside the clamp range (gradient passes).
    in_range: Array2<bool>,
}

impl GaussianHeadOutput {
    /// Splits a network output of width `2 * action_dim` into mean and log-std.
    pub fn from_network(out: ArrayView2<f64>, action_dim: usize) -> Result<Self, NnError> {
        if out.ncols() != 2 * action_dim {
            return Err(NnError::Dimension {
                expected: 2 * action_dim,
                got: out.ncols(),
            });
        }
        let mean = out.slice(s![.., ..action_dim]).to_owned();
        let raw = out.slice(s![.., action_dim..]);
        let in_range = raw.mapv(|v| (LOG_STD_MIN..=LOG_STD_MAX).contains(&v));
        let log_std = raw.mapv(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX));
        Ok(Self {
            mean,
            log_std,
            in_range,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.mean.ncols()
    }

    pub fn std(&self) -> Array2<f64> {
        self.log_std.mapv(f64::exp)
    }
}

/// A reparameterized draw `u = mean + std * noise`, squashed to
/// `action = scale * tanh(u)`.
#[derive(Clone, Debug)]
pub struct SquashedSample {
    pub pre_squash: Array2<f64>,
    pub action: Array2<f64>,
    /// Log-density of `pre_squash` under the unsquashed Gaussian.
    pub pre_squash_log_prob: Array1<f64>,
    /// Log-density of `action`, including the tanh and scale Jacobians.
    pub log_prob: Array1<f64>,
}

/// `ln(1 - tanh(u)^2)`, evaluated without cancellation.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    let softplus = (-2.0 * u).max(0.0) + (-(2.0 * u).abs()).exp().ln_1p();
    2.0 * (std::f64::consts::LN_2 - u - softplus)
}

pub fn gaussian_sample(head: &GaussianHeadOutput, noise: ArrayView2<f64>, action_scale: f64) -> Result<SquashedSample, NnError> {
    if noise.dim() != head.mean.dim() {
        return Err(NnError::Dimension {
            expected: head.mean.ncols(),
            got: noise.ncols(),
        });
    }
    let std = head.std();
    let pre_squash = &head.mean + &(&std * &noise);
    let action = pre_squash.mapv(|u| action_scale * squash(u));
    let adim = head.action_dim() as f64;
    let mut pre_lp = Array1::zeros(noise.nrows());
    let mut lp = Array1::zeros(noise.nrows());
    for (b, (row_n, row_ls)) in noise.outer_iter().zip(head.log_std.outer_iter()).enumerate() {
        let gauss: f64 = row_n
            .iter()
            .zip(row_ls.iter())
            .map(|(e, ls)| -0.5 * e * e - ls - HALF_LN_2PI)
            .sum();
        let jac: f64 = pre_squash.row(b).iter().map(|&u| log_one_minus_tanh_sq(u)).sum();
        pre_lp[b] = gauss;
        lp[b] = gauss - jac - adim * action_scale.ln();
    }
    Ok(SquashedSample {
        pre_squash,
        action,
        pre_squash_log_prob: pre_lp,
        log_prob: lp,
    })
}

/// Gradient of a loss with respect to the raw head output (mean and
/// unclamped log-std columns), given the loss gradients with respect to the
/// squashed action and the action log-probability.
pub fn gaussian_sample_backward(
    head: &GaussianHeadOutput,
    sample: &SquashedSample,
    noise: ArrayView2<f64>,
    grad_action: Option<ArrayView2<f64>>,
    grad_log_prob: ArrayView1<f64>,
    action_scale: f64,
) -> Array2<f64> {
    let (n, a) = head.mean.dim();
    let mut out = Array2::zeros((n, 2 * a));
    let t = sample.pre_squash.mapv(f64::tanh);
    let glp = grad_log_prob.insert_axis(Axis(1));
    // dL/du
    let mut g_u = &t * 2.0 * &glp;
    if let Some(ga) = grad_action {
        Zip::from(&mut g_u)
            .and(&ga)
            .and(&t)
            .for_each(|gu, &g, &tv| *gu += g * action_scale * (1.0 - tv * tv));
    }
    out.slice_mut(s![.., ..a]).assign(&g_u);
    let std = head.std();
    let mut g_ls = &g_u * &std * &noise - &glp;
    Zip::from(&mut g_ls)
        .and(&head.in_range)
        .for_each(|g, &ok| {
            if !ok {
                *g = 0.0
            }
        });
    out.slice_mut(s![.., a..]).assign(&g_ls);
    out
}

/// Mean of the squashed distribution's mode: `scale * tanh(mean)`.
pub fn deterministic_action(head: &GaussianHeadOutput, action_scale: f64) -> Array2<f64> {
    head.mean.mapv(|m| action_scale * squash(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn zero_noise_gives_squashed_mean() {
        let out = array![[0.3, -2.0, 0.1, -0.5]];
        let head = GaussianHeadOutput::from_network(out.view(), 2).unwrap();
        let noise = Array2::zeros((1, 2));
        let s = gaussian_sample(&head, noise.view(), 2e-3).unwrap();
        assert_eq!(s.action, deterministic_action(&head, 2e-3));
        assert!((s.action[[0, 0]] - 2e-3 * 0.3f64.tanh()).abs() < 1e-18);
    }

    #[test]
    fn standard_normal_mode_density() {
        let out = array![[0.0, 0.0]];
        let head = GaussianHeadOutput::from_network(out.view(), 1).unwrap();
        let s = gaussian_sample(&head, Array2::zeros((1, 1)).view(), 1.0).unwrap();
        assert!((s.pre_squash_log_prob[0] + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-15);
        // tanh'(0) = 1, so the squashed density matches too
        assert!((s.log_prob[0] - s.pre_squash_log_prob[0]).abs() < 1e-15);
    }

    #[test]
    fn log_std_is_clamped() {
        let out = array![[0.0, 0.0, 5.0, -30.0]];
        let head = GaussianHeadOutput::from_network(out.view(), 2).unwrap();
        assert_eq!(head.log_std, array![[2.0, -20.0]]);
        assert!(head.std().iter().all(|v| *v > 0.0 && v.is_finite()));
    }

    #[test]
    fn squashed_log_term_is_stable() {
        for u in [-40.0, -3.0, 0.0, 0.7, 25.0] {
            let direct = (1.0 - f64::tanh(u).powi(2)).ln();
            let stable = log_one_minus_tanh_sq(u);
            if direct.is_finite() {
                assert!((direct - stable).abs() < 1e-9, "{u}");
            }
            assert!(stable.is_finite());
        }
    }

    #[test]
    fn monte_carlo_pre_squash_mean() {
        let n = 100_000;
        let (mu, log_std) = (0.4, -0.3f64);
        let out = Array2::from_shape_fn((n, 2), |(_, c)| if c == 0 { mu } else { log_std });
        let head = GaussianHeadOutput::from_network(out.view(), 1).unwrap();
        let mut rng = rng_from_seed(17);
        let noise = Array2::from_shape_fn((n, 1), |_| StandardNormal.sample(&mut rng));
        let s = gaussian_sample(&head, noise.view(), 1.0).unwrap();
        let mean = s.pre_squash.mean().unwrap();
        let se = log_std.exp() / (n as f64).sqrt();
        assert!((mean - mu).abs() < 3.0 * se);
        assert!(s.action.iter().all(|a| a.abs() < 1.0));
    }
}
