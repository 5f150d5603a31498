use std::io::Write;

use serde::{Deserialize, Serialize};

use super::report::{summarize, AdaptationCurve, BenchReport};
use super::suite::EvalSuite;
use super::BenchError;
use crate::baselines::{random_points, search_execute, spiral_points, straight_down, SearchConfig};
use crate::env::{run_episode, EnvConfig, EpisodeResult, InsertionEnv, RewardMode, TaskFamily, TaskParams, Transition};
use crate::grasp::GraspInjection;
use crate::pearl::{adapt, collect_rollout, ContextBatch, PearlAgent};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sac::{SacAgent, SacPolicy};

const GRASP_STREAM: u64 = 0x6a5b;
const HELD_OUT_STREAM: u64 = 0x4e1d;

/// A policy under evaluation.
#[derive(Clone, Debug)]
pub enum Policy {
    StraightDown,
    RandomSearch(SearchConfig),
    SpiralSearch(SearchConfig),
    Sac(SacAgent),
    /// Adapts on `warmup_trials` unscored trials per draw, then keeps
    /// accumulating context through the scored episodes.
    Pearl { agent: PearlAgent, warmup_trials: usize },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::StraightDown => "straight",
            Policy::RandomSearch(_) => "random",
            Policy::SpiralSearch(_) => "spiral",
            Policy::Sac(_) => "sac",
            Policy::Pearl { .. } => "pearl",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Mean actions instead of samples for learned policies.
    pub deterministic: bool,
    /// Draw a grasp error for every episode.
    pub grasp: Option<GraspInjection>,
    /// Correct the goal by the image-based estimate of the grasp error.
    pub grasp_correction: bool,
    pub keep_traces: bool,
}

/// Scored episode with its position in the suite.
#[derive(Clone, Debug)]
pub struct EpisodeTrace {
    pub cell: usize,
    pub draw: usize,
    pub episode: usize,
    pub transitions: Vec<Transition>,
}

#[derive(Clone, Debug, Default)]
pub struct EvalOutcome {
    pub report: BenchReport,
    pub traces: Vec<EpisodeTrace>,
}

/// The task one episode actually faces: the draw's miscalibration plus an
/// optional grasp error, optionally corrected by the image estimate.
pub fn episode_task(task: &TaskParams, opts: &EvalOptions, seed: u64) -> Result<TaskParams, BenchError> {
    let Some(inj) = &opts.grasp else {
        return Ok(task.clone());
    };
    let draw = inj.draw(seed)?;
    let mut t = task.with_assumed_goal_shift(draw.true_error);
    if opts.grasp_correction {
        t = t.with_assumed_goal_shift([-draw.estimated_error[0], -draw.estimated_error[1]]);
    }
    t.validate()?;
    Ok(t)
}

/// Evaluates `policy` on every cell of `suite`. Draw `d` of cell `c` uses the
/// same perturbation for every policy given the same seed.
pub fn eval_policy(policy: &Policy, suite: &EvalSuite, opts: &EvalOptions, seed: u64) -> Result<EvalOutcome, BenchError> {
    suite.validate()?;
    let mut out = EvalOutcome::default();
    for (c, cell) in suite.tasks.iter().enumerate() {
        let family = cell.family()?;
        let base_cfg = EnvConfig::from_family(&family);
        let mut outcomes = Vec::with_capacity(cell.draws * cell.episodes);
        for d in 0..cell.draws {
            let task = family.sample_perturbed_task(cell.noise(), derive_seed(seed, &[c as u64, d as u64]))?;
            let draw_seed = derive_seed(seed, &[c as u64, d as u64, 1]);
            let episodes = run_draw(policy, &base_cfg, &task, cell.episodes, opts, draw_seed)?;
            for (e, res) in episodes.into_iter().enumerate() {
                outcomes.push((res.success, res.insertion_steps, res.insertion_seconds));
                if opts.keep_traces {
                    out.traces.push(EpisodeTrace {
                        cell: c,
                        draw: d,
                        episode: e,
                        transitions: res.transitions,
                    });
                }
            }
        }
        out.report
            .rows
            .push(summarize(policy.name(), &cell.family, cell.noise_mm, &outcomes));
    }
    Ok(out)
}

fn run_draw(
    policy: &Policy,
    base_cfg: &EnvConfig,
    task: &TaskParams,
    episodes: usize,
    opts: &EvalOptions,
    seed: u64,
) -> Result<Vec<EpisodeResult>, BenchError> {
    let grasp_seed = |k: usize| derive_seed(seed, &[GRASP_STREAM, k as u64]);
    let mut rng = rng_from_seed(seed);
    let mut results = Vec::with_capacity(episodes);
    match policy {
        Policy::Pearl { agent, warmup_trials } => {
            let mut context = ContextBatch::new();
            for k in 0..warmup_trials + episodes {
                let t = episode_task(task, opts, grasp_seed(k))?;
                let mut env = InsertionEnv::new(base_cfg.clone(), t, RewardMode::Sparse)?;
                let (res, ctx, _) = collect_rollout(agent, &mut env, &context, !opts.deterministic, &mut rng)?;
                context = ctx;
                if k >= *warmup_trials {
                    results.push(res);
                }
            }
        }
        _ => {
            for k in 0..episodes {
                let t = episode_task(task, opts, grasp_seed(k))?;
                results.push(run_single(policy, base_cfg, t, opts, &mut rng)?);
            }
        }
    }
    Ok(results)
}

fn run_single(
    policy: &Policy,
    base_cfg: &EnvConfig,
    task: TaskParams,
    opts: &EvalOptions,
    rng: &mut crate::rng::Rng,
) -> Result<EpisodeResult, BenchError> {
    let res = match policy {
        Policy::StraightDown => {
            let mut env = InsertionEnv::new(base_cfg.clone(), task, RewardMode::Sparse)?;
            straight_down(&mut env, rng)?
        }
        Policy::RandomSearch(cfg) | Policy::SpiralSearch(cfg) => {
            cfg.validate()?;
            let mut env = InsertionEnv::new(cfg.env_config(base_cfg), task, RewardMode::Sparse)?;
            let points = match policy {
                Policy::RandomSearch(_) => random_points(cfg, [0.0, 0.0], rng),
                _ => spiral_points(cfg, [0.0, 0.0]),
            };
            search_execute(&mut env, points, cfg, rng)?
        }
        Policy::Sac(agent) => {
            let mut env = InsertionEnv::new(base_cfg.clone(), task, RewardMode::Sparse)?;
            let mut p = SacPolicy {
                agent,
                z: vec![0.0; agent.latent_dim()],
                stochastic: !opts.deterministic,
            };
            run_episode(&mut env, &mut p, rng)?
        }
        Policy::Pearl { .. } => unreachable!("pearl episodes share context within a draw"),
    };
    Ok(res)
}

/// Tasks from the training distribution drawn on a stream disjoint from the
/// meta-training tasks of any run.
pub fn held_out_tasks(family: &TaskFamily, count: usize, seed: u64) -> Result<Vec<TaskParams>, BenchError> {
    (0..count)
        .map(|k| Ok(family.sample_task(derive_seed(seed, &[HELD_OUT_STREAM, k as u64]))?))
        .collect()
}

/// Mean and dispersion of per-trial success over independent adaptation
/// runs, one per task in `tasks` and repeat.
pub fn adaptation_curve(
    agent: &PearlAgent,
    label: &str,
    env_cfg: &EnvConfig,
    tasks: &[TaskParams],
    repeats: usize,
    trials: usize,
    stochastic: bool,
    seed: u64,
) -> Result<AdaptationCurve, BenchError> {
    let mut runs: Vec<Vec<f64>> = Vec::with_capacity(tasks.len() * repeats);
    for (i, task) in tasks.iter().enumerate() {
        for r in 0..repeats {
            let mut env = InsertionEnv::new(env_cfg.clone(), task.clone(), RewardMode::Sparse)?;
            let mut rng = rng_from_seed(derive_seed(seed, &[i as u64, r as u64]));
            let res = adapt(agent, &mut env, trials, stochastic, &mut rng)?;
            runs.push(res.trials.iter().map(|t| t.success as u8 as f64).collect());
        }
    }
    Ok(curve_from_runs(label, &runs, trials, trials * env_cfg.horizon))
}

pub fn curve_from_runs(label: &str, runs: &[Vec<f64>], trials: usize, env_steps_per_repeat: usize) -> AdaptationCurve {
    let n = runs.len().max(1) as f64;
    let mean: Vec<f64> = (0..trials).map(|t| runs.iter().map(|r| r[t]).sum::<f64>() / n).collect();
    let std = (0..trials)
        .map(|t| (runs.iter().map(|r| (r[t] - mean[t]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    AdaptationCurve {
        label: label.into(),
        trials,
        repeats: runs.len(),
        mean,
        std,
        env_steps_per_repeat,
    }
}

/// Per suite cell: `repeats` adaptation runs, each on a fresh perturbation
/// draw that stays fixed for that run's trials.
pub fn run_adaptation_experiment(
    agent: &PearlAgent,
    suite: &EvalSuite,
    trials: usize,
    repeats: usize,
    stochastic: bool,
    seed: u64,
) -> Result<Vec<AdaptationCurve>, BenchError> {
    suite.validate()?;
    let mut curves = Vec::with_capacity(suite.tasks.len());
    for (c, cell) in suite.tasks.iter().enumerate() {
        let family = cell.family()?;
        let env_cfg = EnvConfig::from_family(&family);
        let tasks = (0..repeats)
            .map(|r| family.sample_perturbed_task(cell.noise(), derive_seed(seed, &[c as u64, r as u64])))
            .collect::<Result<Vec<_>, _>>()?;
        curves.push(adaptation_curve(agent, &cell.label(), &env_cfg, &tasks, 1, trials, stochastic, derive_seed(seed, &[c as u64, 1]))?);
    }
    Ok(curves)
}

/// One CSV row per step: episode, t, x, y, z, ax, ay, az, r, force.
pub fn write_traces(traces: &[EpisodeTrace], w: impl Write) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["episode", "t", "x", "y", "z", "ax", "ay", "az", "r", "force"])?;
    for (i, tr) in traces.iter().enumerate() {
        for (t, s) in tr.transitions.iter().enumerate() {
            let fields = [s.s[0], s.s[1], s.s[2], s.a[0], s.a[1], s.a[2], s.r, s.contact_force_z];
            let mut rec = vec![i.to_string(), t.to_string()];
            rec.extend(fields.iter().map(f64::to_string));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
