//! Central finite-difference verification of reverse-mode gradients.

use serde::Serialize;

use super::ParamStore;

#[derive(Clone, Copy, Debug)]
pub struct GradCheckConfig {
    pub epsilon: f64,
    pub tolerance: f64,
    /// Coordinates checked per parameter tensor (evenly strided).
    pub max_coords_per_param: usize,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            tolerance: 1e-3,
            max_coords_per_param: 24,
            abs_floor: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst: String,
    pub tolerance: f64,
    pub passed: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} coords, max rel err {:.3e} at {} (tol {:.1e}) {}",
            self.checked,
            self.max_rel_error,
            self.worst,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the gradients currently accumulated in `store` against central
/// differences of `loss`. Values are restored exactly afterwards.
pub fn grad_check(
    store: &mut ParamStore,
    mut loss: impl FnMut(&ParamStore) -> f64,
    cfg: &GradCheckConfig,
) -> GradCheckReport {
    let names: Vec<String> = store.iter().map(|(n, _)| n.clone()).collect();
    let mut checked = 0;
    let mut max_rel = 0.0f64;
    let mut worst = String::from("-");
    for name in names {
        let len = store.get(&name).map(|p| p.len()).unwrap_or(0);
        let stride = (len / cfg.max_coords_per_param.max(1)).max(1);
        for i in (0..len).step_by(stride) {
            let (orig, analytic) = {
                let p = store.get(&name).expect("listed");
                (p.value[i], p.grad[i])
            };
            store.get_mut(&name).expect("listed").value[i] = orig + cfg.epsilon;
            let plus = loss(store);
            store.get_mut(&name).expect("listed").value[i] = orig - cfg.epsilon;
            let minus = loss(store);
            store.get_mut(&name).expect("listed").value[i] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.epsilon);
            let rel = relative_error(analytic, numeric, cfg.abs_floor);
            checked += 1;
            if rel > max_rel || !rel.is_finite() {
                max_rel = if rel.is_finite() { rel } else { f64::INFINITY };
                worst = format!("{name}[{i}]");
            }
        }
    }
    GradCheckReport {
        checked,
        max_rel_error: max_rel,
        worst,
        tolerance: cfg.tolerance,
        passed: max_rel <= cfg.tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mlp, MlpSpec};
    use crate::rng::rng_from_seed;
    use ndarray::Array2;

    #[test]
    fn linear_loss_matches_exactly() {
        let mut s = ParamStore::new();
        s.insert("w", vec![4], vec![0.1, -0.2, 0.3, 0.4]).unwrap();
        let c = [1.5, -2.0, 0.25, 3.0];
        s.get_mut("w").unwrap().grad.copy_from_slice(&c);
        let loss = |st: &ParamStore| st.get("w").unwrap().value.iter().zip(c).map(|(w, c)| w * c).sum();
        let rep = grad_check(&mut s, loss, &GradCheckConfig::default());
        assert!(rep.passed);
        assert!(rep.max_rel_error < 1e-8, "{rep}");
    }

    fn mlp_case(tolerance: f64) -> GradCheckReport {
        let mut rng = rng_from_seed(3);
        let mut store = ParamStore::new();
        let mut spec = MlpSpec::new(3, &[7, 5], 2);
        spec.activation = crate::nn::Activation::Tanh;
        let mlp = Mlp::init(spec, "m", &mut store, &mut rng).unwrap();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - 1.5) * 0.3 + j as f64 * 0.2);
        let loss = |st: &ParamStore| {
            let (y, _) = mlp.forward(st, x.view()).unwrap();
            y.mapv(|v| v * v).sum() * 0.5
        };
        let (y, tape) = mlp.forward(&store, x.view()).unwrap();
        mlp.backward(&mut store, &tape, y.view()).unwrap();
        grad_check(&mut store, loss, &GradCheckConfig { tolerance, ..Default::default() })
    }

    #[test]
    fn nonlinear_net_within_tolerance() {
        let rep = mlp_case(1e-3);
        assert!(rep.passed, "{rep}");
    }

    #[test]
    fn zero_tolerance_reports_failure() {
        assert!(!mlp_case(0.0).passed);
    }
}
