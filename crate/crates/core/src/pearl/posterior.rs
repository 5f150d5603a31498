//! Diagonal Gaussian posterior over the task latent, formed as a product of
//! per-tuple Gaussian factors and the unit prior.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentPosterior {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl LatentPosterior {
    /// Standard normal `N(0, I)`.
    pub fn prior(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Normalized product of the row factors `N(means[n], vars[n])`, times
    /// the unit prior when `with_prior` is set. Precisions add; the mean is
    /// the precision-weighted average.
    pub fn product(means: ArrayView2<f64>, vars: ArrayView2<f64>, with_prior: bool) -> Self {
        let dim = means.ncols();
        let mut precision = vec![if with_prior { 1.0 } else { 0.0 }; dim];
        let mut weighted = vec![0.0; dim];
        for (m, v) in means.outer_iter().zip(vars.outer_iter()) {
            for d in 0..dim {
                let w = 1.0 / v[d];
                precision[d] += w;
                weighted[d] += m[d] * w;
            }
        }
        Self {
            mean: weighted.iter().zip(&precision).map(|(s, p)| s / p).collect(),
            var: precision.iter().map(|p| 1.0 / p).collect(),
        }
    }

    /// Reparameterized draw `mean + sqrt(var) * noise`.
    pub fn sample(&self, noise: &[f64]) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.var)
            .zip(noise)
            .map(|((m, v), e)| m + v.sqrt() * e)
            .collect()
    }

    /// `beta * KL(N(mean, var) || N(0, I))`.
    pub fn kl_to_prior(&self, beta: f64) -> f64 {
        beta * self
            .mean
            .iter()
            .zip(&self.var)
            .map(|(m, v)| 0.5 * (m * m + v - 1.0 - v.ln()))
            .sum::<f64>()
    }

    /// Gradient of [`Self::kl_to_prior`] with respect to mean and variance.
    pub fn kl_grad(&self, beta: f64) -> (Vec<f64>, Vec<f64>) {
        let dm = self.mean.iter().map(|m| beta * m).collect();
        let dv = self.var.iter().map(|v| beta * 0.5 * (1.0 - 1.0 / v)).collect();
        (dm, dv)
    }

    /// Pulls a gradient on a sample back to mean and variance.
    pub fn sample_backward(&self, noise: &[f64], grad_z: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let dv = self
            .var
            .iter()
            .zip(noise)
            .zip(grad_z)
            .map(|((v, e), g)| g * e * 0.5 / v.sqrt())
            .collect();
        (grad_z.to_vec(), dv)
    }

    pub fn mean_norm(&self) -> f64 {
        self.mean.iter().map(|m| m * m).sum::<f64>().sqrt()
    }

    pub fn var_norm(&self) -> f64 {
        self.var.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Gradients of a loss with respect to the factor means and variances, given
/// its gradients with respect to the product's mean and variance.
pub fn product_backward(
    means: ArrayView2<f64>,
    vars: ArrayView2<f64>,
    post: &LatentPosterior,
    grad_mean: &[f64],
    grad_var: &[f64],
) -> (Array2<f64>, Array2<f64>) {
    let mut dm = Array2::zeros(means.raw_dim());
    let mut dv = Array2::zeros(vars.raw_dim());
    for n in 0..means.nrows() {
        for d in 0..means.ncols() {
            let w = 1.0 / vars[[n, d]];
            let p = 1.0 / post.var[d];
            dm[[n, d]] = grad_mean[d] * w / p;
            // d(mean)/dw = (mu - mean)/P, d(var)/dw = -1/P^2, dw/dvar_n = -w^2
            let dw = grad_mean[d] * (means[[n, d]] - post.mean[d]) / p - grad_var[d] / (p * p);
            dv[[n, d]] = -w * w * dw;
        }
    }
    (dm, dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_unit_factors_without_prior() {
        let p = LatentPosterior::product(array![[0.0], [2.0]].view(), array![[1.0], [1.0]].view(), false);
        assert_eq!(p.mean, vec![1.0]);
        assert_eq!(p.var, vec![0.5]);
    }

    #[test]
    fn empty_context_is_prior() {
        let e = Array2::<f64>::zeros((0, 4));
        assert_eq!(LatentPosterior::product(e.view(), e.view(), true), LatentPosterior::prior(4));
    }

    #[test]
    fn kl_values() {
        assert_eq!(LatentPosterior::prior(3).kl_to_prior(1.0), 0.0);
        let p = LatentPosterior {
            mean: vec![1.0],
            var: vec![1.0],
        };
        assert_eq!(p.kl_to_prior(1.0), 0.5);
        assert_eq!(p.kl_to_prior(2.0), 1.0);
    }

    #[test]
    fn sample_with_zero_noise_is_mean() {
        let p = LatentPosterior {
            mean: vec![0.3, -2.0],
            var: vec![0.5, 4.0],
        };
        assert_eq!(p.sample(&[0.0, 0.0]), p.mean);
        assert_eq!(LatentPosterior::prior(2).sample(&[0.7, -1.1]), vec![0.7, -1.1]);
    }

    #[test]
    fn product_backward_matches_differences() {
        let means = array![[0.4, -1.0], [1.5, 0.2], [-0.3, 0.9]];
        let vars = array![[0.5, 2.0], [1.3, 0.7], [0.9, 0.25]];
        // loss = a . mean + b . var
        let (a, b) = ([0.7, -1.2], [2.0, 0.5]);
        let loss = |m: &Array2<f64>, v: &Array2<f64>| {
            let p = LatentPosterior::product(m.view(), v.view(), true);
            a[0] * p.mean[0] + a[1] * p.mean[1] + b[0] * p.var[0] + b[1] * p.var[1]
        };
        let post = LatentPosterior::product(means.view(), vars.view(), true);
        let (dm, dv) = product_backward(means.view(), vars.view(), &post, &a, &b);
        let h = 1e-6;
        for n in 0..3 {
            for d in 0..2 {
                let (mut mp, mut mm) = (means.clone(), means.clone());
                mp[[n, d]] += h;
                mm[[n, d]] -= h;
                let num = (loss(&mp, &vars) - loss(&mm, &vars)) / (2.0 * h);
                assert!((num - dm[[n, d]]).abs() < 1e-7);
                let (mut vp, mut vm) = (vars.clone(), vars.clone());
                vp[[n, d]] += h;
                vm[[n, d]] -= h;
                let num = (loss(&means, &vp) - loss(&means, &vm)) / (2.0 * h);
                assert!((num - dv[[n, d]]).abs() < 1e-7);
            }
        }
    }
}
