use insertion_meta::baselines::*;
use insertion_meta::env::{EnvConfig, InsertionEnv, RewardMode, TaskFamily, TaskParams};
use insertion_meta::rng::{derive_seed, rng_from_seed};

fn plug_task(offset: [f64; 2], block_side: f64) -> TaskParams {
    let mut t = TaskFamily::plug().sample_perturbed_task(0.0, 1).unwrap();
    t.goal_offset = offset;
    t.clearance_block_side = block_side;
    t
}

fn search_env(task: TaskParams, cfg: &SearchConfig) -> InsertionEnv {
    let base = EnvConfig::from_family(&TaskFamily::plug());
    InsertionEnv::new(cfg.env_config(&base), task, RewardMode::Sparse).unwrap()
}

#[test]
fn random_search_matches_geometric_success_probability() {
    let cfg = SearchConfig::default();
    // slack 0.5 mm: a uniform point in the 6 mm square lands within slack
    // on both axes with probability (1 mm / 6 mm)^2
    let task = plug_task([1.0e-3, -0.5e-3], 14e-3);
    let p = (2.0 * task.slack() / cfg.square_side).powi(2);
    let expected = 1.0 - (1.0 - p).powi(cfg.max_points as i32);
    let n = 400;
    let mut env = search_env(task, &cfg);
    let mut successes = 0;
    for e in 0..n {
        let mut rng = rng_from_seed(derive_seed(21, &[e]));
        let pts = random_points(&cfg, [0.0, 0.0], &mut rng);
        successes += search_execute(&mut env, pts, &cfg, &mut rng).unwrap().success as usize;
    }
    let rate = successes as f64 / n as f64;
    let se = (expected * (1.0 - expected) / n as f64).sqrt();
    assert!((rate - expected).abs() <= 3.0 * se, "rate {rate} expected {expected} se {se}");
}

#[test]
fn unreachable_hole_gives_one_contact_per_point() {
    let cfg = SearchConfig::default();
    let task = plug_task([5e-3, 5e-3], 13.5e-3);
    let mut env = search_env(task, &cfg);
    let mut rng = rng_from_seed(3);
    for pts in [spiral_points(&cfg, [0.0, 0.0]), random_points(&cfg, [0.0, 0.0], &mut rng)] {
        let res = search_execute(&mut env, pts, &cfg, &mut rng).unwrap();
        assert!(!res.success);
        assert_eq!(res.contact_events, cfg.max_points);
        assert!(res.steps < cfg.step_budget);
    }
}

#[test]
fn spiral_geometry() {
    let cfg = SearchConfig::default();
    let pts = spiral_points(&cfg, [1e-3, -2e-3]);
    assert_eq!(pts.len(), 50);
    for (k, p) in pts.iter().enumerate() {
        let (dx, dy) = (p[0] - 1e-3, p[1] + 2e-3);
        let r = 0.5e-3 * k as f64 / 8.0;
        assert!((dx.hypot(dy) - r).abs() < 1e-12, "point {k}");
        if k > 0 {
            let angle = dy.atan2(dx);
            let expect = (k as f64 * std::f64::consts::FRAC_PI_4 + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
                - std::f64::consts::PI;
            assert!((angle - expect).abs() < 1e-9 || (angle - expect).abs() > 6.28, "point {k}");
        }
    }
}

#[test]
fn random_points_fill_square() {
    let cfg = SearchConfig::default();
    let mut rng = rng_from_seed(5);
    let pts = random_points(&cfg, [0.5e-3, 0.0], &mut rng);
    assert_eq!(pts.len(), cfg.max_points);
    for p in pts {
        assert!((p[0] - 0.5e-3).abs() <= 3e-3 && p[1].abs() <= 3e-3);
    }
}

#[test]
fn straight_down_on_centered_plug_always_succeeds() {
    let fam = TaskFamily::plug();
    let cfg = EnvConfig::from_family(&fam);
    let mut rng = rng_from_seed(0);
    for k in 0..50 {
        let task = fam.sample_perturbed_task(0.0, k).unwrap();
        let mut env = InsertionEnv::new(cfg.clone(), task, RewardMode::Sparse).unwrap();
        let res = straight_down(&mut env, &mut rng).unwrap();
        assert!(res.success);
        // 5 mm to the lip then 5 mm deep at <= 2.2 mm per step
        assert!(res.success_step.unwrap() <= 6);
        assert!(res.insertion_steps.unwrap() >= 2);
    }
}
