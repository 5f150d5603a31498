//! Rigid, axis-aligned contact model for a square block above a square hole.
//!
//! All positions are the center of the block's bottom face expressed in the
//! frame of the *assumed* goal, at hole-lip height. The table surface is the
//! plane `z = 0` outside the hole footprint.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EnvError, TaskFamily, TaskParams};
use crate::env::task::ResetAnchor;

/// Depth tolerance applied to the success test, absorbing the rounding of
/// repeated 2 mm steps (1 nm).
pub const SUCCESS_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub horizon: usize,
    pub max_step: f64,
    pub workspace_radius: f64,
    pub workspace_height: f64,
    pub contact_stiffness: f64,
    pub hole_depth: f64,
    /// Average velocity used to convert path length into seconds.
    pub velocity: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            max_step: 2e-3,
            workspace_radius: 3e-2,
            workspace_height: 4e-2,
            contact_stiffness: 3000.0,
            hole_depth: 20e-3,
            velocity: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub pos: [f64; 3],
    pub steps_elapsed: usize,
}

impl EnvState {
    pub fn inserted(&self) -> bool {
        self.pos[2] < 0.0
    }
}

/// Commanded Cartesian displacement for one control step (m).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub delta: [f64; 3],
}

impl Action {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Self {
        Self { delta: [dx, dy, dz] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: [f64; 3],
    pub a: [f64; 3],
    pub r: f64,
    pub s_next: [f64; 3],
    pub done: bool,
    pub contact_force_z: f64,
    /// Sparse-reward outcome of `s_next`, kept regardless of the reward mode.
    pub success: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    Sparse,
    Dense,
}

pub fn reward_sparse(state: &EnvState, task: &TaskParams) -> f64 {
    if is_success(state, task) {
        1.0
    } else {
        0.0
    }
}

/// Negative distance to the fully inserted pose below the true hole center.
pub fn reward_dense(state: &EnvState, task: &TaskParams) -> f64 {
    let d = [
        state.pos[0] - task.goal_offset[0],
        state.pos[1] - task.goal_offset[1],
        state.pos[2] + task.success_depth,
    ];
    -(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

pub fn is_success(state: &EnvState, task: &TaskParams) -> bool {
    state.pos[2] <= -task.success_depth + SUCCESS_TOL
}

/// Outcome of resolving one commanded displacement against the geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactResolution {
    pub pos: [f64; 3],
    /// Commanded descent that could not be realized (m, >= 0).
    pub blocked: f64,
}

impl EnvConfig {
    pub fn from_family(family: &TaskFamily) -> Self {
        Self {
            horizon: family.horizon,
            contact_stiffness: family.contact_stiffness,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.horizon == 0 || self.contact_stiffness <= 0.0 || self.max_step <= 0.0 {
            return Err(EnvError::Config(
                "horizon, stiffness and max step must be positive".into(),
            ));
        }
        Ok(())
    }

    fn z_top(&self) -> f64 {
        0.5 * self.workspace_height
    }

    /// Reset with the cube coordinate given in unit coordinates
    /// (`[0.5; 3]` is the cube center).
    pub fn reset_at(&self, task: &TaskParams, unit: [f64; 3]) -> EnvState {
        let law = &task.reset;
        let anchor = match law.anchor {
            ResetAnchor::TrueGoal => task.goal_offset,
            ResetAnchor::AssumedGoal => [0.0, 0.0],
        };
        let side = law.cube_side;
        let pos = [
            anchor[0] + (unit[0] - 0.5) * side,
            anchor[1] + (unit[1] - 0.5) * side,
            law.height + (unit[2] - 0.5) * side,
        ];
        EnvState {
            pos: self.clamp_workspace(pos),
            steps_elapsed: 0,
        }
    }

    pub fn reset_with(&self, task: &TaskParams, rng: &mut impl Rng) -> EnvState {
        let unit = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        self.reset_at(task, unit)
    }

    pub fn reset(&self, task: &TaskParams, rng_seed: u64) -> EnvState {
        self.reset_with(task, &mut crate::rng::rng_from_seed(rng_seed))
    }

    /// Pushes a position back inside the workspace cylinder along the normal
    /// of the violated surface(s).
    pub fn clamp_workspace(&self, mut pos: [f64; 3]) -> [f64; 3] {
        let r = pos[0].hypot(pos[1]);
        if r > self.workspace_radius {
            let k = self.workspace_radius / r;
            pos[0] *= k;
            pos[1] *= k;
        }
        let top = self.z_top();
        pos[2] = pos[2].clamp(-top, top);
        pos
    }

    /// Applies a (scaled) displacement: horizontal motion first, clamped by the
    /// hole walls when the block is below the lip, then vertical motion,
    /// stopped by the table or the hole bottom.
    pub fn resolve_contact(&self, task: &TaskParams, pos: [f64; 3], d: [f64; 3]) -> ContactResolution {
        let g = task.goal_offset;
        let s = task.slack();
        let mut xy = [pos[0] + d[0], pos[1] + d[1]];
        if pos[2] < 0.0 {
            xy[0] = xy[0].clamp(g[0] - s, g[0] + s);
            xy[1] = xy[1].clamp(g[1] - s, g[1] + s);
        }
        let target = pos[2] + d[2];
        let (z, blocked) = if d[2] < 0.0 {
            let floor = if pos[2] < 0.0 || task.footprint_fits(xy) {
                -self.hole_depth
            } else {
                0.0_f64.min(pos[2])
            };
            if target < floor {
                (floor, floor - target)
            } else {
                (target, 0.0)
            }
        } else {
            (target, 0.0)
        };
        ContactResolution {
            pos: [xy[0], xy[1], z],
            blocked,
        }
    }

    pub fn step(
        &self,
        state: &EnvState,
        task: &TaskParams,
        action: &Action,
        mode: RewardMode,
    ) -> Result<(EnvState, Transition), EnvError> {
        if state.steps_elapsed >= self.horizon {
            return Err(EnvError::EpisodeExhausted {
                horizon: self.horizon,
            });
        }
        let a = action
            .delta
            .map(|v| if v.is_finite() { v.clamp(-self.max_step, self.max_step) } else { 0.0 });
        let (pos, force) = if is_success(state, task) {
            // inserted: hold still, keep collecting reward
            (state.pos, 0.0)
        } else {
            let d = a.map(|v| v * task.step_scale);
            let res = self.resolve_contact(task, state.pos, d);
            (self.clamp_workspace(res.pos), self.contact_stiffness * res.blocked)
        };
        let next = EnvState {
            pos,
            steps_elapsed: state.steps_elapsed + 1,
        };
        let r = match mode {
            RewardMode::Sparse => reward_sparse(&next, task),
            RewardMode::Dense => reward_dense(&next, task),
        };
        let tr = Transition {
            s: state.pos,
            a,
            r,
            s_next: next.pos,
            done: next.steps_elapsed >= self.horizon,
            contact_force_z: force,
            success: is_success(&next, task),
        };
        Ok((next, tr))
    }

    /// Seconds needed to travel `path_length` at the configured velocity.
    pub fn seconds_for(&self, path_length: f64) -> f64 {
        path_length / self.velocity
    }
}

/// An environment instance owning its task and current state.
#[derive(Clone, Debug)]
pub struct InsertionEnv {
    pub config: EnvConfig,
    pub task: TaskParams,
    pub mode: RewardMode,
    state: EnvState,
}

impl InsertionEnv {
    pub fn new(config: EnvConfig, task: TaskParams, mode: RewardMode) -> Result<Self, EnvError> {
        config.validate()?;
        task.validate()?;
        let state = config.reset_at(&task, [0.5; 3]);
        Ok(Self {
            config,
            task,
            mode,
            state,
        })
    }

    pub fn reset(&mut self, rng: &mut impl Rng) -> [f64; 3] {
        self.state = self.config.reset_with(&self.task, rng);
        self.state.pos
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn step(&mut self, action: &Action) -> Result<Transition, EnvError> {
        let (next, tr) = self.config.step(&self.state, &self.task, action, self.mode)?;
        self.state = next;
        Ok(tr)
    }

    pub fn is_success(&self) -> bool {
        is_success(&self.state, &self.task)
    }
}
