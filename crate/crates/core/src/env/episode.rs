//! The single episode driver shared by scripted and learned policies, so step
//! budgets, success detection and insertion metrics are computed one way.

use serde::{Deserialize, Serialize};

use super::{Action, EnvError, InsertionEnv, Transition};
use crate::rng::Rng;

/// Vertical force at or above which a step counts as a contact event (N).
pub const CONTACT_FORCE_THRESHOLD: f64 = 3.0;

pub trait InsertionPolicy {
    /// Called after the environment has been reset.
    fn begin_episode(&mut self, _obs: [f64; 3], _rng: &mut Rng) {}

    fn act(&mut self, obs: [f64; 3], rng: &mut Rng) -> Action;

    fn observe(&mut self, _tr: &Transition) {}

    /// Scripted policies stop early once inserted or out of candidates.
    fn finished(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: usize,
    /// Index (1-based) of the step that reached success.
    pub success_step: Option<usize>,
    /// Steps from the first step ending below the lip to the success step.
    pub insertion_steps: Option<usize>,
    /// Path length of that segment converted at the configured velocity.
    pub insertion_seconds: Option<f64>,
    pub contact_events: usize,
    pub total_reward: f64,
    pub transitions: Vec<Transition>,
}

impl EpisodeResult {
    /// Insertion metrics of a recorded trajectory.
    pub fn from_transitions(transitions: Vec<Transition>, velocity: f64) -> Self {
        let success_idx = transitions.iter().position(|t| t.success);
        let below_idx = transitions.iter().position(|t| t.s_next[2] < 0.0);
        let (insertion_steps, insertion_seconds) = match (success_idx, below_idx) {
            (Some(k), Some(f)) if f <= k => {
                let path: f64 = transitions[f + 1..=k]
                    .iter()
                    .map(|t| dist(t.s, t.s_next))
                    .sum();
                (Some(k - f), Some(path / velocity))
            }
            _ => (None, None),
        };
        Self {
            success: success_idx.is_some(),
            steps: transitions.len(),
            success_step: success_idx.map(|k| k + 1),
            insertion_steps,
            insertion_seconds,
            contact_events: transitions
                .iter()
                .filter(|t| t.contact_force_z >= CONTACT_FORCE_THRESHOLD)
                .count(),
            total_reward: transitions.iter().map(|t| t.r).sum(),
            transitions,
        }
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Resets `env` and runs `policy` until the horizon or until the policy
/// reports that it is finished.
pub fn run_episode(
    env: &mut InsertionEnv,
    policy: &mut dyn InsertionPolicy,
    rng: &mut Rng,
) -> Result<EpisodeResult, EnvError> {
    let mut obs = env.reset(rng);
    policy.begin_episode(obs, rng);
    let mut transitions = Vec::with_capacity(env.config.horizon);
    while env.state().steps_elapsed < env.config.horizon && !policy.finished() {
        let a = policy.act(obs, rng);
        let tr = env.step(&a)?;
        policy.observe(&tr);
        obs = tr.s_next;
        transitions.push(tr);
    }
    Ok(EpisodeResult::from_transitions(transitions, env.config.velocity))
}

/// Emits the same action every step.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub Action);

impl InsertionPolicy for ConstantPolicy {
    fn act(&mut self, _obs: [f64; 3], _rng: &mut Rng) -> Action {
        self.0
    }
}
