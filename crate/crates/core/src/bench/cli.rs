use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use super::{
    eval_policy, held_out_tasks, run_adaptation_experiment, run_gradient_checks, write_traces, BenchReport, EvalOptions,
    EvalSuite, Policy, ReportFormat, RunConfig,
};
use crate::env::{EnvConfig, InsertionEnv, RewardMode, TaskParams};
use crate::grasp::{estimate_offset, GrayImage};
use crate::nn::{Checkpoint, GradCheckConfig};
use crate::pearl::{adapt, meta_train, PearlAgent};
use crate::rng::{derive_seed, rng_from_seed};
use crate::sac::{train_sac, SacAgent};

#[derive(Parser, Debug)]
#[command(name = "insertion", version, about = "Meta-RL insertion benchmark")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Flat TOML file overriding training and evaluation settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; reports go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Straight,
    Random,
    Spiral,
    Sac,
    Pearl,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum RewardArg {
    Sparse,
    Dense,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Meta-train a PEARL agent and write its checkpoint (default pearl.json).
    Train {
        /// Per-iteration training log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Adapt a trained agent to one task and write the per-trial log (CSV).
    Adapt {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Task record (JSON); defaults to a held-out task of the family.
        #[arg(long)]
        task: Option<PathBuf>,
        /// Use a miscalibrated setup with this per-axis goal noise instead.
        #[arg(long)]
        noise_mm: Option<f64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        deterministic: bool,
    },
    /// Evaluate one policy on a suite.
    Eval {
        #[arg(long, value_enum)]
        policy: PolicyArg,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "plug0")]
        suite: String,
        #[arg(long)]
        deterministic: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
        /// Per-step trace of every scored episode (CSV).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Evaluate several policies on a suite and optionally record adaptation curves.
    Bench {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Repeatable; defaults to the scripted baselines plus any policy with a checkpoint.
        #[arg(long = "policy", value_enum)]
        policies: Vec<PolicyArg>,
        #[arg(long)]
        pearl: Option<PathBuf>,
        #[arg(long)]
        sac: Option<PathBuf>,
        #[arg(long)]
        deterministic: bool,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
        /// Adaptation curves of the PEARL checkpoint on every suite task (CSV).
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Train SAC from scratch on one task and write its checkpoint (default sac.json).
    SacTrain {
        #[arg(long, default_value_t = 0.0)]
        noise_mm: f64,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, value_enum, default_value = "sparse")]
        reward: RewardArg,
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Estimate the grasp offset between two graymap images.
    GraspCorrect {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        img: PathBuf,
        #[arg(long)]
        mm_per_px: f64,
    },
    /// Compare analytic and finite-difference gradients of every loss.
    GradCheck {
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn cli_dispatch(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            1
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn report_text(report: &BenchReport, format: ReportFormat) -> anyhow::Result<String> {
    Ok(match format {
        ReportFormat::Csv => report.to_csv()?,
        ReportFormat::Json => report.to_json(),
    })
}

fn load_pearl(path: &Path) -> anyhow::Result<PearlAgent> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(PearlAgent::from_checkpoint(&ck)?)
}

fn load_sac(path: &Path) -> anyhow::Result<SacAgent> {
    let ck = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(SacAgent::from_checkpoint(&ck)?)
}

fn build_policy(kind: PolicyArg, checkpoint: Option<&Path>, cfg: &RunConfig) -> anyhow::Result<Policy> {
    let need = || checkpoint.with_context(|| format!("policy {kind:?} needs a checkpoint"));
    Ok(match kind {
        PolicyArg::Straight => Policy::StraightDown,
        PolicyArg::Random => Policy::RandomSearch(cfg.search()),
        PolicyArg::Spiral => Policy::SpiralSearch(cfg.search()),
        PolicyArg::Sac => Policy::Sac(load_sac(need()?)?),
        PolicyArg::Pearl => Policy::Pearl {
            agent: load_pearl(need()?)?,
            warmup_trials: cfg.warmup_trials,
        },
    })
}

fn eval_options(cfg: &RunConfig, deterministic: bool, keep_traces: bool) -> EvalOptions {
    EvalOptions {
        deterministic,
        grasp: cfg.grasp(),
        grasp_correction: cfg.grasp_correction,
        keep_traces,
    }
}

fn write_csv_rows<T: serde::Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Train { log } => {
            let family = cfg.task_family()?;
            let env_cfg = EnvConfig::from_family(&family);
            let outcome = meta_train(&family, &env_cfg, cfg.pearl(), cfg.meta_train(), seed, |row| {
                eprintln!(
                    "iter {} steps {} prior {:.2} posterior {:.2} kl {:.3}",
                    row.iteration, row.env_steps, row.prior_success, row.posterior_success, row.kl
                )
            })?;
            let mut ck = outcome.agent.to_checkpoint();
            ck.set_meta("seed", seed);
            ck.set_meta("family", &family.name);
            ck.save(out.unwrap_or(Path::new("pearl.json")))?;
            if let Some(p) = log {
                write_csv_rows(&p, &outcome.log)?;
            }
        }
        Command::Adapt {
            checkpoint,
            task,
            noise_mm,
            trials,
            deterministic,
        } => {
            let agent = load_pearl(&checkpoint)?;
            let family = cfg.task_family()?;
            let task = match (task, noise_mm) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    TaskParams::from_record(&text)?
                }
                (None, Some(mm)) => family.sample_perturbed_task(mm * 1e-3, derive_seed(seed, &[0]))?,
                (None, None) => held_out_tasks(&family, 1, seed)?.remove(0),
            };
            let mut env = InsertionEnv::new(EnvConfig::from_family(&family), task, RewardMode::Sparse)?;
            let mut rng = rng_from_seed(derive_seed(seed, &[1]));
            let res = adapt(&agent, &mut env, trials.unwrap_or(cfg.adapt_trials), !deterministic, &mut rng)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record([
                "trial_index",
                "success",
                "insertion_steps",
                "cumulative_success_rate",
                "posterior_mean_norm",
                "posterior_var_norm",
            ])?;
            for t in &res.trials {
                w.write_record([
                    t.trial_index.to_string(),
                    (t.success as u8).to_string(),
                    t.insertion_steps.map(|s| s.to_string()).unwrap_or_default(),
                    t.cumulative_success_rate.to_string(),
                    t.posterior_mean_norm.to_string(),
                    t.posterior_var_norm.to_string(),
                ])?;
            }
            emit(out, &String::from_utf8(w.into_inner()?)?)?;
        }
        Command::Eval {
            policy,
            checkpoint,
            suite,
            deterministic,
            format,
            trace,
        } => {
            let suite = EvalSuite::named(&suite, cfg.draws, cfg.episodes)?;
            let policy = build_policy(policy, checkpoint.as_deref(), &cfg)?;
            let outcome = eval_policy(&policy, &suite, &eval_options(&cfg, deterministic, trace.is_some()), seed)?;
            if let Some(p) = trace {
                let f = std::fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
                write_traces(&outcome.traces, f)?;
            }
            emit(out, &report_text(&outcome.report, format)?)?;
        }
        Command::Bench {
            suite,
            mut policies,
            pearl,
            sac,
            deterministic,
            format,
            curves,
        } => {
            let suite = EvalSuite::named(&suite, cfg.draws, cfg.episodes)?;
            if policies.is_empty() {
                policies = vec![PolicyArg::Straight, PolicyArg::Random, PolicyArg::Spiral];
                if sac.is_some() {
                    policies.push(PolicyArg::Sac);
                }
                if pearl.is_some() {
                    policies.push(PolicyArg::Pearl);
                }
            }
            let opts = eval_options(&cfg, deterministic, false);
            let mut report = BenchReport::default();
            for kind in policies {
                let ck = match kind {
                    PolicyArg::Sac => sac.as_deref(),
                    PolicyArg::Pearl => pearl.as_deref(),
                    _ => None,
                };
                let policy = build_policy(kind, ck, &cfg)?;
                report.rows.extend(eval_policy(&policy, &suite, &opts, seed)?.report.rows);
            }
            if let Some(p) = curves {
                let ck = pearl.as_deref().context("--curves needs --pearl")?;
                let agent = load_pearl(ck)?;
                report.curves = run_adaptation_experiment(&agent, &suite, cfg.adapt_trials, cfg.repeats, !deterministic, seed)?;
                std::fs::write(&p, report.curves_csv()?).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(out, &report_text(&report, format)?)?;
        }
        Command::SacTrain {
            noise_mm,
            steps,
            reward,
            log,
        } => {
            let family = cfg.task_family()?;
            let task = family.sample_perturbed_task(noise_mm * 1e-3, derive_seed(seed, &[0]))?;
            let mut train = cfg.sac_train();
            if let Some(s) = steps {
                train.total_steps = s;
            }
            let mode = match reward {
                RewardArg::Sparse => RewardMode::Sparse,
                RewardArg::Dense => RewardMode::Dense,
            };
            let outcome = train_sac(&EnvConfig::from_family(&family), &task, mode, &train, derive_seed(seed, &[1]))?;
            for row in &outcome.log {
                eprintln!("step {} success {:.2} return {:.3}", row.step, row.success_rate, row.mean_return);
            }
            let mut ck = outcome.agent.to_checkpoint();
            ck.set_meta("seed", seed);
            ck.set_meta("task", &task);
            ck.save(out.unwrap_or(Path::new("sac.json")))?;
            if let Some(p) = log {
                write_csv_rows(&p, &outcome.log)?;
            }
        }
        Command::GraspCorrect {
            reference,
            img,
            mm_per_px,
        } => {
            let r = GrayImage::read_pgm(&reference)?;
            let q = GrayImage::read_pgm(&img)?;
            let (px, m) = estimate_offset(&r, &q, mm_per_px)?;
            emit(
                out,
                &format!("{} {} {} {} {}\n", px.dx, px.dy, m[0] * 1e3, m[1] * 1e3, px.score),
            )?;
        }
        Command::GradCheck { tolerance } => {
            let gc = GradCheckConfig {
                tolerance,
                ..GradCheckConfig::default()
            };
            let reports = run_gradient_checks(seed, &gc)?;
            let text: String = reports.iter().map(|(name, r)| format!("{name}: {r}\n")).collect();
            emit(out, &text)?;
            if reports.iter().any(|(_, r)| !r.passed) {
                bail!("gradient check failed");
            }
        }
    }
    Ok(0)
}
