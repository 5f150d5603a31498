//! Task parameters and the randomized task families they are drawn from.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::rng::rng_from_seed;

const MM: f64 = 1e-3;

/// Largest horizontal goal offset a family may request, in meters.
pub const MAX_GOAL_OFFSET: f64 = 5e-3;

/// Where the reset cube is centered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetAnchor {
    /// Above the true hole center (simulated training tasks).
    TrueGoal,
    /// Above the assumed goal, i.e. the observation origin (miscalibrated setups).
    AssumedGoal,
}

/// Initial-state law of a task.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResetLaw {
    pub anchor: ResetAnchor,
    /// Side of the axis-aligned cube the reset position is drawn from (m).
    pub cube_side: f64,
    /// Height of the cube center above the hole lip (m).
    pub height: f64,
}

impl ResetLaw {
    /// 5 mm cube, 5 mm above the true goal.
    pub fn training() -> Self {
        Self {
            anchor: ResetAnchor::TrueGoal,
            cube_side: 5.0 * MM,
            height: 5.0 * MM,
        }
    }

    /// Deterministic reset 5 mm above the assumed goal.
    pub fn calibrated_setup() -> Self {
        Self {
            anchor: ResetAnchor::AssumedGoal,
            cube_side: 0.0,
            height: 5.0 * MM,
        }
    }
}

/// One sampled insertion task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskParams {
    pub task_id: u64,
    /// True hole center relative to the assumed goal (m).
    pub goal_offset: [f64; 2],
    /// Side of the square block held by the gripper (m).
    pub clearance_block_side: f64,
    /// Multiplier applied to every commanded displacement.
    pub step_scale: f64,
    /// Side of the square hole (m).
    pub hole_side: f64,
    /// Depth below the lip that counts as a full insertion (m).
    pub success_depth: f64,
    pub reset: ResetLaw,
}

impl TaskParams {
    /// Per-axis lateral play of the block inside the hole.
    pub fn slack(&self) -> f64 {
        0.5 * (self.hole_side - self.clearance_block_side)
    }

    /// Whether a block centered at `xy` fits the hole footprint.
    pub fn footprint_fits(&self, xy: [f64; 2]) -> bool {
        let s = self.slack();
        (xy[0] - self.goal_offset[0]).abs() <= s && (xy[1] - self.goal_offset[1]).abs() <= s
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let finite = self.goal_offset.iter().all(|v| v.is_finite())
            && self.clearance_block_side.is_finite()
            && self.hole_side.is_finite()
            && self.step_scale.is_finite()
            && self.success_depth.is_finite();
        if !finite {
            return Err(EnvError::InvalidTask("non-finite parameter".into()));
        }
        if self.goal_offset.iter().any(|v| v.abs() > MAX_GOAL_OFFSET + 1e-12) {
            return Err(EnvError::InvalidTask(format!(
                "goal offset {:?} exceeds 5 mm",
                self.goal_offset
            )));
        }
        if self.clearance_block_side <= 0.0 || self.hole_side <= self.clearance_block_side {
            return Err(EnvError::InvalidTask(
                "hole side must exceed block side".into(),
            ));
        }
        if !(0.9 - 1e-12..=1.1 + 1e-12).contains(&self.step_scale) {
            return Err(EnvError::InvalidTask(format!(
                "step scale {} outside [0.9, 1.1]",
                self.step_scale
            )));
        }
        if self.success_depth <= 0.0 || self.reset.cube_side < 0.0 {
            return Err(EnvError::InvalidTask("non-positive depth".into()));
        }
        Ok(())
    }

    /// Returns a copy with the assumed goal moved by `shift` (m), as after a
    /// recalibration or grasp correction. The hole does not move, so the
    /// offset seen from the new origin changes by `-shift`.
    pub fn with_assumed_goal_shift(&self, shift: [f64; 2]) -> Self {
        let mut t = self.clone();
        t.goal_offset = [
            self.goal_offset[0] - shift[0],
            self.goal_offset[1] - shift[1],
        ];
        t
    }

    pub fn to_record(&self) -> String {
        serde_json::to_string(self).expect("task params serialize")
    }

    pub fn from_record(text: &str) -> Result<Self, EnvError> {
        let t: Self =
            serde_json::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }
}

/// Ranges from which [`TaskParams`] are drawn. Lengths in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskFamily {
    pub name: String,
    pub offset_max: f64,
    pub block_side_min: f64,
    pub block_side_max: f64,
    pub hole_side: f64,
    pub step_scale_min: f64,
    pub step_scale_max: f64,
    pub success_depth: f64,
    pub horizon: usize,
    pub contact_stiffness: f64,
}

impl TaskFamily {
    /// Connector-plug family: 13-14 mm block in a 15 mm hole.
    pub fn plug() -> Self {
        Self {
            name: "plug".into(),
            offset_max: 5.0 * MM,
            block_side_min: 13.0 * MM,
            block_side_max: 14.0 * MM,
            hole_side: 15.0 * MM,
            step_scale_min: 0.9,
            step_scale_max: 1.1,
            success_depth: 5.0 * MM,
            horizon: 50,
            contact_stiffness: 3000.0,
        }
    }

    /// Gear family: 0.3-0.6 mm clearance and a deeper success threshold.
    pub fn gear() -> Self {
        Self {
            name: "gear".into(),
            block_side_min: 14.4 * MM,
            block_side_max: 14.7 * MM,
            success_depth: 8.0 * MM,
            ..Self::plug()
        }
    }

    pub fn by_name(name: &str) -> Result<Self, EnvError> {
        match name {
            "plug" => Ok(Self::plug()),
            "gear" => Ok(Self::gear()),
            other => Err(EnvError::Config(format!("unknown task family `{other}`"))),
        }
    }

    /// Family whose ranges are collapsed onto a single task.
    pub fn degenerate(task: &TaskParams) -> Self {
        Self {
            name: "degenerate".into(),
            offset_max: task.goal_offset[0].abs().max(task.goal_offset[1].abs()),
            block_side_min: task.clearance_block_side,
            block_side_max: task.clearance_block_side,
            hole_side: task.hole_side,
            step_scale_min: task.step_scale,
            step_scale_max: task.step_scale,
            success_depth: task.success_depth,
            ..Self::plug()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let ranges = [
            ("block side", self.block_side_min, self.block_side_max),
            ("step scale", self.step_scale_min, self.step_scale_max),
        ];
        for (what, lo, hi) in ranges {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(EnvError::Config(format!("{what} range [{lo}, {hi}] is empty")));
            }
        }
        if !(0.0..=MAX_GOAL_OFFSET + 1e-12).contains(&self.offset_max) {
            return Err(EnvError::Config(format!(
                "offset_max {} m outside [0, 5 mm]",
                self.offset_max
            )));
        }
        if self.block_side_min <= 0.0 || self.block_side_max >= self.hole_side {
            return Err(EnvError::Config("block must be smaller than hole".into()));
        }
        if self.step_scale_min < 0.9 - 1e-12 || self.step_scale_max > 1.1 + 1e-12 {
            return Err(EnvError::Config("step scale must stay within +-10%".into()));
        }
        if self.success_depth <= 0.0 || self.horizon == 0 || self.contact_stiffness <= 0.0 {
            return Err(EnvError::Config(
                "success depth, horizon and stiffness must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Draws a task uniformly and independently per parameter.
    pub fn sample_task(&self, rng_seed: u64) -> Result<TaskParams, EnvError> {
        self.validate()?;
        let mut rng = rng_from_seed(rng_seed);
        let offset = [
            uniform(&mut rng, -self.offset_max, self.offset_max),
            uniform(&mut rng, -self.offset_max, self.offset_max),
        ];
        Ok(TaskParams {
            task_id: rng_seed,
            goal_offset: offset,
            clearance_block_side: uniform(&mut rng, self.block_side_min, self.block_side_max),
            step_scale: uniform(&mut rng, self.step_scale_min, self.step_scale_max),
            hole_side: self.hole_side,
            success_depth: self.success_depth,
            reset: ResetLaw::training(),
        })
    }

    /// An evaluation task modelling a real setup: the family's geometry and
    /// actuation, the assumed goal perturbed uniformly by `+-noise` per
    /// horizontal axis, and a deterministic reset above the assumed goal.
    pub fn sample_perturbed_task(&self, noise: f64, rng_seed: u64) -> Result<TaskParams, EnvError> {
        if !(0.0..=MAX_GOAL_OFFSET).contains(&noise) {
            return Err(EnvError::Config(format!("goal noise {noise} m out of range")));
        }
        let mut task = self.sample_task(rng_seed)?;
        let mut rng = rng_from_seed(rng_seed ^ 0x005e_ed0f_9a11);
        task.goal_offset = [
            uniform(&mut rng, -noise, noise),
            uniform(&mut rng, -noise, noise),
        ];
        task.reset = ResetLaw::calibrated_setup();
        Ok(task)
    }

    pub fn from_kv_str(text: &str) -> Result<Self, EnvError> {
        let file: FamilyFile = toml::from_str(text).map_err(|e| EnvError::Config(e.to_string()))?;
        let fam = file.into_family();
        fam.validate()?;
        Ok(fam)
    }

    pub fn to_kv_string(&self) -> String {
        toml::to_string(&FamilyFile::from_family(self)).expect("family serializes")
    }
}

fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// On-disk form of a family, in millimetres. Missing keys fall back to the
/// plug family.
#[derive(Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FamilyFile {
    name: String,
    offset_max_mm: f64,
    block_side_min_mm: f64,
    block_side_max_mm: f64,
    hole_side_mm: f64,
    step_scale_min: f64,
    step_scale_max: f64,
    success_depth_mm: f64,
    horizon: usize,
    contact_stiffness: f64,
}

impl Default for FamilyFile {
    fn default() -> Self {
        Self::from_family(&TaskFamily::plug())
    }
}

impl FamilyFile {
    fn from_family(f: &TaskFamily) -> Self {
        Self {
            name: f.name.clone(),
            offset_max_mm: f.offset_max / MM,
            block_side_min_mm: f.block_side_min / MM,
            block_side_max_mm: f.block_side_max / MM,
            hole_side_mm: f.hole_side / MM,
            step_scale_min: f.step_scale_min,
            step_scale_max: f.step_scale_max,
            success_depth_mm: f.success_depth / MM,
            horizon: f.horizon,
            contact_stiffness: f.contact_stiffness,
        }
    }

    fn into_family(self) -> TaskFamily {
        TaskFamily {
            name: self.name,
            offset_max: self.offset_max_mm * MM,
            block_side_min: self.block_side_min_mm * MM,
            block_side_max: self.block_side_max_mm * MM,
            hole_side: self.hole_side_mm * MM,
            step_scale_min: self.step_scale_min,
            step_scale_max: self.step_scale_max,
            success_depth: self.success_depth_mm * MM,
            horizon: self.horizon,
            contact_stiffness: self.contact_stiffness,
        }
    }
}
