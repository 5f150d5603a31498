mod common;

use common::{contact_oracle, random_pair, GRID};
use insertion_meta::baselines::straight_down;
use insertion_meta::env::*;
use insertion_meta::rng::{derive_seed, rng_from_seed};
use proptest::prelude::*;

#[test]
fn analytic_contact_matches_grid_oracle() {
    let fam = TaskFamily::plug();
    let cfg = EnvConfig::from_family(&fam);
    let mut rng = rng_from_seed(31);
    for k in 0..300u64 {
        let task = fam.sample_task(derive_seed(5, &[k])).unwrap();
        let (pos, d) = random_pair(&task, &mut rng);
        let res = cfg.resolve_contact(&task, pos, d);
        let (opos, oblocked) = contact_oracle(&cfg, &task, pos, d);
        for j in 0..3 {
            assert!((res.pos[j] - opos[j]).abs() <= GRID + 1e-9, "{k}: {pos:?} {d:?} {:?} vs {opos:?}", res.pos);
        }
        assert!((res.blocked - oblocked).abs() <= GRID + 1e-9);
    }
}

#[test]
fn table_contact_reports_force() {
    let fam = TaskFamily::plug();
    let cfg = EnvConfig::from_family(&fam);
    let task = fam.sample_perturbed_task(0.0, 3).unwrap().with_assumed_goal_shift([-4e-3, 0.0]);
    let mut env = InsertionEnv::new(cfg.clone(), task, RewardMode::Sparse).unwrap();
    env.reset(&mut rng_from_seed(0));
    let mut forces = Vec::new();
    for _ in 0..4 {
        forces.push(env.step(&Action::new(0.0, 0.0, -2e-3)).unwrap().contact_force_z);
    }
    // 5 mm above the table: two free steps, one half-blocked, then fully blocked
    assert_eq!(forces[0], 0.0);
    assert_eq!(forces[1], 0.0);
    let s = env.task.step_scale;
    let expect_last = cfg.contact_stiffness * 2e-3 * s;
    assert!((forces[3] - expect_last).abs() < 1e-9, "{forces:?}");
    assert!(forces[3] >= CONTACT_FORCE_THRESHOLD);
}

#[test]
fn straight_down_succeeds_iff_within_slack() {
    let fam = TaskFamily::plug();
    let cfg = EnvConfig::from_family(&fam);
    let mut rng = rng_from_seed(2);
    for k in 0..300u64 {
        let task = fam.sample_perturbed_task(1.5e-3, derive_seed(8, &[k])).unwrap();
        let predicted = task.goal_offset[0].abs() <= task.slack() && task.goal_offset[1].abs() <= task.slack();
        let mut env = InsertionEnv::new(cfg.clone(), task, RewardMode::Sparse).unwrap();
        let res = straight_down(&mut env, &mut rng).unwrap();
        assert_eq!(res.success, predicted, "task {k}");
    }
}

#[test]
fn task_records_round_trip() {
    let t = TaskFamily::gear().sample_task(11).unwrap();
    assert_eq!(TaskParams::from_record(&t.to_record()).unwrap(), t);
    let fam = TaskFamily::gear();
    assert_eq!(TaskFamily::from_kv_str(&fam.to_kv_string()).unwrap(), fam);
}

#[test]
fn success_holds_still() {
    let fam = TaskFamily::plug();
    let task = fam.sample_perturbed_task(0.0, 1).unwrap();
    let mut env = InsertionEnv::new(EnvConfig::from_family(&fam), task, RewardMode::Sparse).unwrap();
    env.reset(&mut rng_from_seed(0));
    while !env.is_success() {
        env.step(&Action::new(0.0, 0.0, -2e-3)).unwrap();
    }
    let here = env.state().pos;
    let tr = env.step(&Action::new(2e-3, 2e-3, 2e-3)).unwrap();
    assert_eq!(tr.s_next, here);
    assert_eq!(tr.r, 1.0);
}

#[test]
fn horizon_is_enforced() {
    let fam = TaskFamily::plug();
    let task = fam.sample_task(1).unwrap();
    let mut env = InsertionEnv::new(EnvConfig::from_family(&fam), task, RewardMode::Dense).unwrap();
    env.reset(&mut rng_from_seed(0));
    for _ in 0..50 {
        env.step(&Action::new(0.0, 0.0, 0.0)).unwrap();
    }
    assert!(matches!(
        env.step(&Action::new(0.0, 0.0, 0.0)),
        Err(EnvError::EpisodeExhausted { horizon: 50 })
    ));
}

fn action() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-5e-3..5e-3f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectories_stay_in_workspace_and_respect_bounds(seed in 0u64..1000, actions in prop::collection::vec(action(), 1..50)) {
        let fam = TaskFamily::plug();
        let cfg = EnvConfig::from_family(&fam);
        let task = fam.sample_task(seed).unwrap();
        let mut env = InsertionEnv::new(cfg.clone(), task.clone(), RewardMode::Dense).unwrap();
        env.reset(&mut rng_from_seed(seed));
        for a in &actions {
            let tr = env.step(&Action::new(a[0], a[1], a[2])).unwrap();
            let p = tr.s_next;
            prop_assert!(p[0].hypot(p[1]) <= cfg.workspace_radius + 1e-12);
            prop_assert!(p[2].abs() <= 0.5 * cfg.workspace_height + 1e-12);
            prop_assert!(p[2] >= -cfg.hole_depth - 1e-12);
            prop_assert!(tr.a.iter().all(|v| v.abs() <= cfg.max_step));
            if p[2] < 0.0 {
                for j in 0..2 {
                    prop_assert!((p[j] - task.goal_offset[j]).abs() <= task.slack() + 1e-12);
                }
            }
            prop_assert!(tr.contact_force_z >= 0.0);
            prop_assert!(tr.r <= 0.0);
        }
    }

    #[test]
    fn same_seed_same_trajectory(seed in 0u64..1000, actions in prop::collection::vec(action(), 1..20)) {
        let fam = TaskFamily::gear();
        let task = fam.sample_task(seed).unwrap();
        let run = || {
            let mut env = InsertionEnv::new(EnvConfig::from_family(&fam), task.clone(), RewardMode::Sparse).unwrap();
            env.reset(&mut rng_from_seed(seed));
            actions.iter().map(|a| env.step(&Action::new(a[0], a[1], a[2])).unwrap()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn training_resets_lie_in_cube(seed in 0u64..10_000) {
        let fam = TaskFamily::plug();
        let task = fam.sample_task(seed).unwrap();
        let cfg = EnvConfig::from_family(&fam);
        let s = cfg.reset(&task, seed ^ 1);
        for j in 0..2 {
            prop_assert!((s.pos[j] - task.goal_offset[j]).abs() <= 2.5e-3 + 1e-12);
        }
        prop_assert!((s.pos[2] - 5e-3).abs() <= 2.5e-3 + 1e-12);
        prop_assert!(task.goal_offset.iter().all(|g| g.abs() <= 5e-3));
        prop_assert!(task.step_scale >= 0.9 && task.step_scale <= 1.1);
    }
}
