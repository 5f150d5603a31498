use serde::{Deserialize, Serialize};

use super::{NnError, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update over every entry of `store`, followed by
/// clearing the gradients. Nothing is modified if any gradient is non-finite.
pub fn adam_step(store: &mut ParamStore, cfg: &AdamConfig) -> Result<(), NnError> {
    for (name, p) in store.iter() {
        if p.grad.iter().any(|g| !g.is_finite()) {
            return Err(NnError::NonFiniteGradient(name.clone()));
        }
    }
    store.step += 1;
    let t = store.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (_, p) in store.iter_mut() {
        let n = p.value.len();
        for i in 0..n {
            let g = p.grad[i];
            p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g;
            p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = p.m[i] / c1;
            let v_hat = p.v[i] / c2;
            p.value[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            p.grad[i] = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_values() {
        let mut s = store();
        for _ in 0..10 {
            adam_step(&mut s, &AdamConfig::default()).unwrap();
        }
        assert_eq!(s.get("w").unwrap().value, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn constant_gradient_moves_by_lr_against_sign() {
        let mut s = store();
        let cfg = AdamConfig::with_lr(1e-2);
        let grads = [3.0, -0.2, 1e-3];
        for _ in 0..200 {
            let before = s.get("w").unwrap().value.clone();
            s.get_mut("w").unwrap().grad.copy_from_slice(&grads);
            adam_step(&mut s, &cfg).unwrap();
            let after = &s.get("w").unwrap().value;
            for i in 0..3 {
                let step = after[i] - before[i];
                assert_eq!(step.signum(), -grads[i].signum());
                assert!((step.abs() - cfg.lr).abs() < 1e-6 * cfg.lr.max(1.0) + 1e-5 * cfg.lr);
            }
            assert!(s.get("w").unwrap().grad.iter().all(|g| *g == 0.0));
        }
    }

    #[test]
    fn identical_inputs_identical_updates() {
        let mut a = store();
        let mut b = store();
        for k in 0..5 {
            let g = [k as f64, -1.5, 0.25];
            a.get_mut("w").unwrap().grad.copy_from_slice(&g);
            b.get_mut("w").unwrap().grad.copy_from_slice(&g);
            adam_step(&mut a, &AdamConfig::default()).unwrap();
            adam_step(&mut b, &AdamConfig::default()).unwrap();
        }
        assert_eq!(a, b);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut s = store();
        s.get_mut("w").unwrap().grad[1] = f64::NAN;
        assert_eq!(
            adam_step(&mut s, &AdamConfig::default()),
            Err(NnError::NonFiniteGradient("w".into()))
        );
        assert_eq!(s.step, 0);
        assert_eq!(s.get("w").unwrap().value, vec![0.5, -1.0, 2.0]);
    }
}
