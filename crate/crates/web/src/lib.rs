//! Browser bindings for three interactive views: scripted search on a
//! miscalibrated plug task, grasp-offset correlation, and the latent
//! posterior as a product of Gaussian factors.

use insertion_meta::baselines::{random_points, search_execute, spiral_points, SearchConfig};
use insertion_meta::env::{EnvConfig, InsertionEnv, RewardMode, TaskFamily};
use insertion_meta::grasp::{cross_correlate, BorderMode, GrayImage};
use insertion_meta::pearl::LatentPosterior;
use insertion_meta::rng::{derive_seed, rng_from_seed};
use ndarray::ArrayView2;
use wasm_bindgen::prelude::*;

const MM: f64 = 1e-3;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// One scripted search episode. Positions are in millimeters relative to
/// the assumed goal.
#[wasm_bindgen]
pub struct SearchRun {
    path: Vec<f64>,
    success: bool,
    steps: usize,
    contacts: usize,
    slack: f64,
}

#[wasm_bindgen]
impl SearchRun {
    /// Flattened `x, y, z` triples, starting at the reset pose.
    #[wasm_bindgen(getter)]
    pub fn path(&self) -> Vec<f64> {
        self.path.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn success(&self) -> bool {
        self.success
    }
    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> usize {
        self.steps
    }
    #[wasm_bindgen(getter)]
    pub fn contacts(&self) -> usize {
        self.contacts
    }
    /// Per-axis misalignment (mm) the block still fits through.
    #[wasm_bindgen(getter)]
    pub fn slack_mm(&self) -> f64 {
        self.slack
    }
}

/// Runs spiral or random search against a plug hole displaced by
/// `(hole_x_mm, hole_y_mm)` from where the robot believes it is.
#[wasm_bindgen]
pub fn search_trajectory(kind: &str, hole_x_mm: f64, hole_y_mm: f64, seed: u32) -> Result<SearchRun, JsValue> {
    let family = TaskFamily::plug();
    let cfg = SearchConfig::default();
    let env_cfg = cfg.env_config(&EnvConfig::from_family(&family));
    let mut task = family.sample_perturbed_task(0.0, derive_seed(seed as u64, &[0])).map_err(js_err)?;
    task.goal_offset = [hole_x_mm * MM, hole_y_mm * MM];
    let mut rng = rng_from_seed(derive_seed(seed as u64, &[1]));
    let points = match kind {
        "spiral" => spiral_points(&cfg, [0.0, 0.0]),
        "random" => random_points(&cfg, [0.0, 0.0], &mut rng),
        other => return Err(js_err(format!("unknown search kind {other:?}"))),
    };
    let slack = task.slack() / MM;
    let mut env = InsertionEnv::new(env_cfg, task, RewardMode::Sparse).map_err(js_err)?;
    let res = search_execute(&mut env, points, &cfg, &mut rng).map_err(js_err)?;
    let mut path = Vec::with_capacity(3 * (res.transitions.len() + 1));
    if let Some(first) = res.transitions.first() {
        path.extend(first.s.iter().map(|v| v / MM));
    }
    for t in &res.transitions {
        path.extend(t.s_next.iter().map(|v| v / MM));
    }
    Ok(SearchRun {
        path,
        success: res.success,
        steps: res.steps,
        contacts: res.contact_events,
        slack,
    })
}

/// Normalized correlation of a textured underside image against a copy
/// shifted by `(dx, dy)` pixels with additive noise.
#[wasm_bindgen]
pub struct Correlation {
    surface: Vec<f64>,
    size: usize,
    peak_dx: i32,
    peak_dy: i32,
    score: f64,
}

#[wasm_bindgen]
impl Correlation {
    /// Row-major scores for shifts `-size/2 ..= size/2 - 1` on both axes.
    #[wasm_bindgen(getter)]
    pub fn surface(&self) -> Vec<f64> {
        self.surface.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.size
    }
    #[wasm_bindgen(getter)]
    pub fn peak_dx(&self) -> i32 {
        self.peak_dx
    }
    #[wasm_bindgen(getter)]
    pub fn peak_dy(&self) -> i32 {
        self.peak_dy
    }
    #[wasm_bindgen(getter)]
    pub fn score(&self) -> f64 {
        self.score
    }
}

#[wasm_bindgen]
pub fn correlate_shift(dx: i32, dy: i32, noise: f64, seed: u32) -> Result<Correlation, JsValue> {
    let size = 64;
    let reference = GrayImage::textured(size, size, seed as u64);
    let mut query = reference.shifted(dx as i64, dy as i64);
    let mut rng = rng_from_seed(derive_seed(seed as u64, &[2]));
    for v in query.pixels.iter_mut() {
        *v += noise * (rand::Rng::random::<f64>(&mut rng) - 0.5);
    }
    let peak = cross_correlate(&reference, &query, BorderMode::ZeroPadded)
        .map_err(js_err)?
        .argmax();
    let cyclic = cross_correlate(&reference, &query, BorderMode::Cyclic).map_err(js_err)?;
    Ok(Correlation {
        surface: cyclic.values,
        size,
        peak_dx: peak.dx as i32,
        peak_dy: peak.dy as i32,
        score: peak.score,
    })
}

/// Posterior `[mean, variance]` of a 1-D latent from Gaussian factors,
/// optionally including the standard normal prior.
#[wasm_bindgen]
pub fn posterior_1d(means: &[f64], variances: &[f64], with_prior: bool) -> Result<Vec<f64>, JsValue> {
    if means.len() != variances.len() {
        return Err(js_err("means and variances differ in length"));
    }
    if variances.iter().any(|v| !(*v > 0.0)) {
        return Err(js_err("variances must be positive"));
    }
    let m = ArrayView2::from_shape((means.len(), 1), means).map_err(js_err)?;
    let v = ArrayView2::from_shape((variances.len(), 1), variances).map_err(js_err)?;
    let p = LatentPosterior::product(m, v, with_prior);
    Ok(vec![p.mean[0], p.var[0]])
}
