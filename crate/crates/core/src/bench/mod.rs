//! Evaluation suites, report files and the command-line front end.

mod checks;
pub mod cli;
mod config;
mod eval;
mod report;
mod suite;

pub use checks::run_gradient_checks;
pub use config::RunConfig;
pub use eval::{
    adaptation_curve, curve_from_runs, episode_task, eval_policy, held_out_tasks, run_adaptation_experiment,
    write_traces, EpisodeTrace, EvalOptions, EvalOutcome, Policy,
};
pub use report::{summarize, AdaptationCurve, BenchReport, ReportFormat, ReportRow};
pub use suite::{EvalSuite, SuiteTask, NOISE_LEVELS_MM};

use crate::env::EnvError;
use crate::grasp::GraspError;
use crate::nn::NnError;
use crate::sac::SacError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Learner(#[from] SacError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}
