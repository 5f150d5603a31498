//! Translational grasp-error estimation from an underside image of the held
//! part, and the corresponding goal correction.

mod correlate;
mod image;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

pub use correlate::{cross_correlate, cross_correlate_direct, BorderMode, CorrelationSurface, PixelOffset};
pub use image::GrayImage;

use crate::rng::rng_from_seed;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraspError {
    #[error("image shape: {0}")]
    Shape(String),
    #[error("image has zero variance; correlation is undefined")]
    ConstantImage,
    #[error("image io: {0}")]
    Io(String),
    #[error("mm per pixel must be positive, got {0}")]
    Scale(f64),
}

/// Pixel shift of `query` relative to `reference` and its metric equivalent
/// in meters. Image x maps to world x and image y to world y.
pub fn estimate_offset(
    reference: &GrayImage,
    query: &GrayImage,
    mm_per_pixel: f64,
) -> Result<(PixelOffset, [f64; 2]), GraspError> {
    if !(mm_per_pixel > 0.0) {
        return Err(GraspError::Scale(mm_per_pixel));
    }
    let peak = cross_correlate(reference, query, BorderMode::ZeroPadded)?.argmax();
    let m = mm_per_pixel * 1e-3;
    Ok((peak, [peak.dx as f64 * m, peak.dy as f64 * m]))
}

/// A part displaced by `+d` in the gripper must aim at a goal moved by `-d`.
pub fn adjust_goal(assumed_goal: [f64; 2], offset: [f64; 2]) -> [f64; 2] {
    [assumed_goal[0] - offset[0], assumed_goal[1] - offset[1]]
}

/// Synthetic grasp errors rendered as shifted underside images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspInjection {
    /// Per-axis bound of the uniform grasp error (m).
    pub max_error: f64,
    pub mm_per_pixel: f64,
    pub image_size: usize,
    pub texture_seed: u64,
}

impl Default for GraspInjection {
    fn default() -> Self {
        Self {
            max_error: 1e-3,
            mm_per_pixel: 0.1,
            image_size: 64,
            texture_seed: 7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspDraw {
    /// Sampled displacement of the part in the gripper (m).
    pub true_error: [f64; 2],
    /// Displacement recovered from the images (m).
    pub estimated_error: [f64; 2],
}

impl GraspInjection {
    pub fn reference(&self) -> GrayImage {
        GrayImage::textured(self.image_size, self.image_size, self.texture_seed)
    }

    /// Draws a grasp error, renders the displaced part and recovers the
    /// displacement by correlation.
    pub fn draw(&self, seed: u64) -> Result<GraspDraw, GraspError> {
        let mut rng = rng_from_seed(seed);
        let e = self.max_error;
        let true_error = [rng.random_range(-e..=e), rng.random_range(-e..=e)];
        let m = self.mm_per_pixel * 1e-3;
        let reference = self.reference();
        let query = reference.shifted((true_error[0] / m).round() as i64, (true_error[1] / m).round() as i64);
        let (_, estimated_error) = estimate_offset(&reference, &query, self.mm_per_pixel)?;
        Ok(GraspDraw {
            true_error,
            estimated_error,
        })
    }
}
