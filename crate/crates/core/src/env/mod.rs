//! Family of simulated square-peg insertion tasks.

mod episode;
mod sim;
mod task;

pub use episode::{
    run_episode, ConstantPolicy, EpisodeResult, InsertionPolicy, CONTACT_FORCE_THRESHOLD,
};
pub use sim::{
    is_success, reward_dense, reward_sparse, Action, ContactResolution, EnvConfig, EnvState,
    InsertionEnv, RewardMode, Transition, SUCCESS_TOL,
};
pub use task::{ResetAnchor, ResetLaw, TaskFamily, TaskParams, MAX_GOAL_OFFSET};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("episode exhausted: horizon of {horizon} steps reached")]
    EpisodeExhausted { horizon: usize },
}
