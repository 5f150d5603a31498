//! Scripted insertion strategies: straight down, and force-triggered random
//! or spiral search over candidate points above the assumed goal.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::{
    run_episode, Action, EnvConfig, EnvError, EpisodeResult, InsertionEnv, InsertionPolicy, Transition,
};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Side of the square random points are drawn from (m).
    pub square_side: f64,
    /// Vertical force that ends a descent (N).
    pub force_threshold: f64,
    /// Radial growth of the spiral per full rotation (m).
    pub spiral_radius_per_rotation: f64,
    pub spiral_angle_step_deg: f64,
    pub max_points: usize,
    /// Vertical step used while descending and ascending (m).
    pub descent_step: f64,
    /// Horizontal distance at which a target point counts as reached (m).
    pub position_tolerance: f64,
    /// Environment steps available to one search episode.
    pub step_budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            square_side: 6e-3,
            force_threshold: 3.0,
            spiral_radius_per_rotation: 0.5e-3,
            spiral_angle_step_deg: 45.0,
            max_points: 50,
            descent_step: 2e-3,
            position_tolerance: 1e-5,
            step_budget: 1000,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            self.square_side,
            self.force_threshold,
            self.spiral_radius_per_rotation,
            self.spiral_angle_step_deg,
            self.descent_step,
            self.position_tolerance,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_points == 0 || self.step_budget == 0 {
            return Err(EnvError::Config(format!("invalid search config {self:?}")));
        }
        Ok(())
    }

    /// Environment configuration with the search step budget as horizon.
    pub fn env_config(&self, base: &EnvConfig) -> EnvConfig {
        EnvConfig {
            horizon: self.step_budget,
            ..base.clone()
        }
    }
}

/// Archimedean spiral: point `k` at angle `k * step` and radius
/// `k * step / 360deg * pitch`.
pub fn spiral_points(cfg: &SearchConfig, assumed_goal: [f64; 2]) -> Vec<[f64; 2]> {
    let per_rotation = 360.0 / cfg.spiral_angle_step_deg;
    (0..cfg.max_points)
        .map(|k| {
            let angle = (k as f64 * cfg.spiral_angle_step_deg).to_radians();
            let radius = k as f64 / per_rotation * cfg.spiral_radius_per_rotation;
            [
                assumed_goal[0] + radius * angle.cos(),
                assumed_goal[1] + radius * angle.sin(),
            ]
        })
        .collect()
}

/// `max_points` draws, uniform on the square centered at `assumed_goal`.
pub fn random_points(cfg: &SearchConfig, assumed_goal: [f64; 2], rng: &mut Rng) -> Vec<[f64; 2]> {
    let h = 0.5 * cfg.square_side;
    (0..cfg.max_points)
        .map(|_| {
            [
                assumed_goal[0] + rng.random_range(-h..=h),
                assumed_goal[1] + rng.random_range(-h..=h),
            ]
        })
        .collect()
}

/// Moves straight down at the maximum step until inserted.
#[derive(Clone, Debug)]
pub struct StraightDown {
    pub step: f64,
    inserted: bool,
}

impl StraightDown {
    pub fn new(step: f64) -> Self {
        Self { step, inserted: false }
    }
}

impl InsertionPolicy for StraightDown {
    fn begin_episode(&mut self, _obs: [f64; 3], _rng: &mut Rng) {
        self.inserted = false;
    }

    fn act(&mut self, _obs: [f64; 3], _rng: &mut Rng) -> Action {
        Action::new(0.0, 0.0, -self.step)
    }

    fn observe(&mut self, tr: &Transition) {
        self.inserted |= tr.success;
    }

    fn finished(&self) -> bool {
        self.inserted
    }
}

pub fn straight_down(env: &mut InsertionEnv, rng: &mut Rng) -> Result<EpisodeResult, EnvError> {
    let mut p = StraightDown::new(env.config.max_step);
    run_episode(env, &mut p, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    MoveTo,
    Descend,
    Ascend,
    Done,
}

/// Force-triggered search: at each point descend until the contact force
/// reaches the threshold or the part is inserted; on contact ascend one step
/// and move on to the next point.
#[derive(Clone, Debug)]
pub struct SearchPolicy {
    pub cfg: SearchConfig,
    pub points: Vec<[f64; 2]>,
    max_step: f64,
    idx: usize,
    phase: Phase,
    pub contact_events: usize,
    pub inserted: bool,
}

impl SearchPolicy {
    pub fn new(cfg: SearchConfig, points: Vec<[f64; 2]>, max_step: f64) -> Self {
        Self {
            cfg,
            points,
            max_step,
            idx: 0,
            phase: Phase::MoveTo,
            contact_events: 0,
            inserted: false,
        }
    }

    /// Index of the point currently being probed.
    pub fn point_index(&self) -> usize {
        self.idx
    }
}

impl InsertionPolicy for SearchPolicy {
    fn begin_episode(&mut self, _obs: [f64; 3], _rng: &mut Rng) {
        self.idx = 0;
        self.contact_events = 0;
        self.inserted = false;
        self.phase = if self.points.is_empty() { Phase::Done } else { Phase::MoveTo };
    }

    fn act(&mut self, obs: [f64; 3], _rng: &mut Rng) -> Action {
        if self.phase == Phase::MoveTo {
            let p = self.points[self.idx];
            let (ex, ey) = (p[0] - obs[0], p[1] - obs[1]);
            if ex.hypot(ey) <= self.cfg.position_tolerance {
                self.phase = Phase::Descend;
            } else {
                let m = self.max_step;
                return Action::new(ex.clamp(-m, m), ey.clamp(-m, m), 0.0);
            }
        }
        match self.phase {
            Phase::Descend => Action::new(0.0, 0.0, -self.cfg.descent_step),
            Phase::Ascend => Action::new(0.0, 0.0, self.cfg.descent_step),
            _ => Action::default(),
        }
    }

    fn observe(&mut self, tr: &Transition) {
        if tr.success {
            self.inserted = true;
            self.phase = Phase::Done;
            return;
        }
        match self.phase {
            Phase::Descend if tr.contact_force_z >= self.cfg.force_threshold => {
                self.contact_events += 1;
                self.phase = Phase::Ascend;
            }
            Phase::Ascend if tr.contact_force_z < self.cfg.force_threshold => {
                self.idx += 1;
                self.phase = if self.idx < self.points.len() { Phase::MoveTo } else { Phase::Done };
            }
            _ => {}
        }
    }

    fn finished(&self) -> bool {
        self.phase == Phase::Done
    }
}

/// Runs the force-triggered search over `points`. The environment horizon
/// acts as the step budget.
pub fn search_execute(
    env: &mut InsertionEnv,
    points: Vec<[f64; 2]>,
    cfg: &SearchConfig,
    rng: &mut Rng,
) -> Result<EpisodeResult, EnvError> {
    if points.is_empty() {
        return Err(EnvError::Config("search needs at least one point".into()));
    }
    let mut p = SearchPolicy::new(cfg.clone(), points, env.config.max_step);
    run_episode(env, &mut p, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spiral_examples() {
        let pts = spiral_points(&SearchConfig::default(), [0.0, 0.0]);
        assert_eq!(pts.len(), 50);
        assert_eq!(pts[0], [0.0, 0.0]);
        assert!((pts[8][0] - 0.5e-3).abs() < 1e-15 && pts[8][1].abs() < 1e-15);
        let r49 = pts[49][0].hypot(pts[49][1]);
        assert!((r49 - 3.0625e-3).abs() < 1e-12);
    }
}
