use insertion_meta::bench::run_gradient_checks;
use insertion_meta::env::{EnvConfig, InsertionEnv, RewardMode, TaskFamily, Transition};
use insertion_meta::nn::{adam_step, gaussian_sample, AdamConfig, Checkpoint, GaussianHeadOutput, GradCheckConfig, ParamStore};
use insertion_meta::pearl::{adapt, LatentPosterior, PearlAgent, PearlConfig};
use insertion_meta::rng::rng_from_seed;
use insertion_meta::sac::{ReplayBuffer, SacAgent, SacConfig};
use ndarray::Array2;
use proptest::prelude::*;

#[test]
fn all_losses_pass_gradient_check() {
    for seed in 0..4 {
        for (name, r) in run_gradient_checks(seed, &GradCheckConfig::default()).unwrap() {
            assert!(r.passed, "seed {seed} {name}: {r}");
            assert!(r.checked > 20);
        }
    }
}

#[test]
fn adam_constant_gradient_moves_by_lr() {
    let mut s = ParamStore::new();
    s.insert("w", vec![2], vec![0.0, 0.0]).unwrap();
    let cfg = AdamConfig::with_lr(0.01);
    for _ in 0..200 {
        s.get_mut("w").unwrap().grad.copy_from_slice(&[3.0, -0.5]);
        adam_step(&mut s, &cfg).unwrap();
    }
    let w = &s.get("w").unwrap().value;
    // every step moves by lr against the sign of the gradient
    assert!((w[0] + 2.0).abs() < 1e-6, "{w:?}");
    assert!((w[1] - 2.0).abs() < 1e-6, "{w:?}");
}

#[test]
fn two_factor_product_closed_form() {
    let means = Array2::from_shape_vec((2, 1), vec![0.0, 2.0]).unwrap();
    let vars = Array2::from_shape_vec((2, 1), vec![1.0, 1.0]).unwrap();
    let p = LatentPosterior::product(means.view(), vars.view(), false);
    assert!((p.mean[0] - 1.0).abs() < 1e-15 && (p.var[0] - 0.5).abs() < 1e-15);
    let empty = Array2::zeros((0, 3));
    assert_eq!(LatentPosterior::product(empty.view(), empty.view(), true), LatentPosterior::prior(3));
}

/// Product of Gaussian densities evaluated on a grid and renormalized.
fn numeric_product(means: &[f64], vars: &[f64]) -> (f64, f64) {
    let (lo, hi, n) = (-12.0, 12.0, 48_001);
    let h = (hi - lo) / (n - 1) as f64;
    let mut mass = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..n {
        let x = lo + i as f64 * h;
        let logp: f64 = means.iter().zip(vars).map(|(m, v)| -0.5 * (x - m) * (x - m) / v).sum::<f64>() - 0.5 * x * x;
        let p = logp.exp();
        mass += p;
        m1 += p * x;
        m2 += p * x * x;
    }
    let mean = m1 / mass;
    (mean, m2 / mass - mean * mean)
}

#[test]
fn product_matches_numerical_integration() {
    let means = [0.7, -1.3, 2.1];
    let vars = [0.8, 2.5, 1.7];
    let m = Array2::from_shape_vec((3, 1), means.to_vec()).unwrap();
    let v = Array2::from_shape_vec((3, 1), vars.to_vec()).unwrap();
    let p = LatentPosterior::product(m.view(), v.view(), true);
    let (nm, nv) = numeric_product(&means, &vars);
    assert!((p.mean[0] - nm).abs() < 1e-6 && (p.var[0] - nv).abs() < 1e-6);
}

#[test]
fn adaptation_leaves_parameters_untouched() {
    let mut rng = rng_from_seed(4);
    let agent = PearlAgent::new(PearlConfig::default(), 2e-3, &mut rng).unwrap();
    let before = agent.to_checkpoint();
    let fam = TaskFamily::plug();
    let mut env = InsertionEnv::new(EnvConfig::from_family(&fam), fam.sample_task(3).unwrap(), RewardMode::Sparse).unwrap();
    let res = adapt(&agent, &mut env, 4, true, &mut rng).unwrap();
    assert_eq!(res.trials.len(), 4);
    assert_eq!(res.context.len(), 4 * 50);
    assert_eq!(agent.to_checkpoint(), before);
}

#[test]
fn checkpoints_round_trip() {
    let mut rng = rng_from_seed(9);
    let dir = tempfile::tempdir().unwrap();
    let pearl = PearlAgent::new(PearlConfig::default(), 2e-3, &mut rng).unwrap();
    let p = dir.path().join("p.json");
    pearl.to_checkpoint().save(&p).unwrap();
    let back = PearlAgent::from_checkpoint(&Checkpoint::load(&p).unwrap()).unwrap();
    assert_eq!(back.to_checkpoint(), pearl.to_checkpoint());

    let sac = SacAgent::new(SacConfig::default(), 0, 2e-3, &mut rng).unwrap();
    let s = dir.path().join("s.json");
    sac.to_checkpoint().save(&s).unwrap();
    let back = SacAgent::from_checkpoint(&Checkpoint::load(&s).unwrap()).unwrap();
    assert_eq!(back.to_checkpoint(), sac.to_checkpoint());
    assert!(SacAgent::from_checkpoint(&pearl.to_checkpoint()).is_err());
}

#[test]
fn replay_sampling_is_uniform() {
    let k = 20;
    let mut buf = ReplayBuffer::new(k);
    // overfill so the ring wraps
    for i in 0..3 * k {
        buf.push(Transition {
            s: [i as f64, 0.0, 0.0],
            a: [0.0; 3],
            r: 0.0,
            s_next: [0.0; 3],
            done: false,
            contact_force_z: 0.0,
            success: false,
        });
    }
    assert_eq!(buf.len(), k);
    let mut rng = rng_from_seed(12);
    let n = 40_000;
    let mut counts = vec![0usize; k];
    for tr in buf.sample(n, &mut rng) {
        let id = tr.s[0] as usize;
        assert!(id >= 2 * k, "stale transition {id} survived the wrap");
        counts[id - 2 * k] += 1;
    }
    let e = n as f64 / k as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    // 19 degrees of freedom, p = 0.001 critical value
    assert!(chi2 < 43.82, "chi2 = {chi2}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn posterior_is_permutation_invariant(
        rows in prop::collection::vec((prop::array::uniform3(-5.0..5.0f64), prop::array::uniform3(0.01..10.0f64)), 1..30),
        rot in 0usize..30,
    ) {
        let n = rows.len();
        let build = |order: &[usize]| {
            let m = Array2::from_shape_fn((n, 3), |(i, d)| rows[order[i]].0[d]);
            let v = Array2::from_shape_fn((n, 3), |(i, d)| rows[order[i]].1[d]);
            LatentPosterior::product(m.view(), v.view(), true)
        };
        let id: Vec<usize> = (0..n).collect();
        let mut perm: Vec<usize> = (0..n).rev().collect();
        perm.rotate_left(rot % n);
        let (a, b) = (build(&id), build(&perm));
        for d in 0..3 {
            prop_assert!((a.mean[d] - b.mean[d]).abs() <= 1e-10);
            prop_assert!((a.var[d] - b.var[d]).abs() <= 1e-10);
        }
    }

    #[test]
    fn posterior_variance_shrinks_with_context(
        rows in prop::collection::vec((prop::array::uniform3(-5.0..5.0f64), prop::array::uniform3(1e-6..100.0f64)), 1..30),
    ) {
        let mut prev = LatentPosterior::prior(3);
        for k in 1..=rows.len() {
            let m = Array2::from_shape_fn((k, 3), |(i, d)| rows[i].0[d]);
            let v = Array2::from_shape_fn((k, 3), |(i, d)| rows[i].1[d]);
            let p = LatentPosterior::product(m.view(), v.view(), true);
            for d in 0..3 {
                prop_assert!(p.var[d] <= prev.var[d]);
                prop_assert!(p.var[d] > 0.0);
            }
            prev = p;
        }
    }

    #[test]
    fn squashed_actions_stay_in_bound(
        out in prop::collection::vec(-60.0..60.0f64, 6),
        noise in prop::array::uniform3(-8.0..8.0f64),
        scale in 1e-4..1.0f64,
    ) {
        let head = GaussianHeadOutput::from_network(Array2::from_shape_vec((1, 6), out).unwrap().view(), 3).unwrap();
        let nz = Array2::from_shape_vec((1, 3), noise.to_vec()).unwrap();
        let s = gaussian_sample(&head, nz.view(), scale).unwrap();
        prop_assert!(s.action.iter().all(|a| a.abs() < scale));
        prop_assert!(s.log_prob.iter().all(|l| l.is_finite()));
    }
}
