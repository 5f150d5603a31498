#![allow(dead_code)]

use insertion_meta::env::{EnvConfig, TaskParams};
use insertion_meta::rng::Rng;
use rand::Rng as _;

/// Grid resolution of the brute-force contact oracle (m).
pub const GRID: f64 = 1e-4;
const EDGE_EPS: f64 = 1e-9;

/// Whether the point lies inside solid material: the table top (z < 0
/// outside the hole opening) or below the hole bottom.
fn solid(task: &TaskParams, depth: f64, p: [f64; 3]) -> bool {
    if p[2] < -depth - EDGE_EPS {
        return true;
    }
    if p[2] >= 0.0 {
        return false;
    }
    let h = 0.5 * task.hole_side + EDGE_EPS;
    let g = task.goal_offset;
    (p[0] - g[0]).abs() > h || (p[1] - g[1]).abs() > h
}

/// Samples the block's bottom perimeter (and center) at grid spacing.
fn block_collides(task: &TaskParams, depth: f64, center: [f64; 3]) -> bool {
    let half = 0.5 * task.clearance_block_side;
    let n = (2.0 * half / GRID).ceil() as usize;
    let mut pts = vec![[center[0], center[1]]];
    for i in 0..=n {
        let t = -half + 2.0 * half * i as f64 / n as f64;
        pts.extend([[center[0] + t, center[1] - half], [center[0] + t, center[1] + half]]);
        pts.extend([[center[0] - half, center[1] + t], [center[0] + half, center[1] + t]]);
    }
    pts.iter().any(|p| solid(task, depth, [p[0], p[1], center[2]]))
}

/// Brute-force resolution of one displacement: horizontal target projected
/// onto the nearest collision-free grid position, then the vertical move
/// walked in grid increments until the block would enter material. Returns
/// the final position and the blocked descent.
pub fn contact_oracle(cfg: &EnvConfig, task: &TaskParams, pos: [f64; 3], d: [f64; 3]) -> ([f64; 3], f64) {
    let depth = cfg.hole_depth;
    let target = [pos[0] + d[0], pos[1] + d[1]];
    let xy = if pos[2] < 0.0 && block_collides(task, depth, [target[0], target[1], pos[2]]) {
        // nearest feasible grid point around the target
        let reach = ((d[0].abs() + d[1].abs()) / GRID).ceil() as i64 + 2;
        let mut best = (f64::INFINITY, target);
        for i in -reach..=reach {
            for j in -reach..=reach {
                let c = [target[0] + i as f64 * GRID, target[1] + j as f64 * GRID];
                let dist = (c[0] - target[0]).hypot(c[1] - target[1]);
                if dist < best.0 && !block_collides(task, depth, [c[0], c[1], pos[2]]) {
                    best = (dist, c);
                }
            }
        }
        best.1
    } else {
        target
    };
    if d[2] >= 0.0 {
        return ([xy[0], xy[1], pos[2] + d[2]], 0.0);
    }
    let steps = (-d[2] / GRID).ceil() as usize;
    let mut z = pos[2];
    for k in 1..=steps {
        let cand = (pos[2] - k as f64 * GRID).max(pos[2] + d[2]);
        if block_collides(task, depth, [xy[0], xy[1], cand]) {
            break;
        }
        z = cand;
    }
    ([xy[0], xy[1], z], z - (pos[2] + d[2]))
}

/// A physically valid random state near the hole and a random displacement.
pub fn random_pair(task: &TaskParams, rng: &mut Rng) -> ([f64; 3], [f64; 3]) {
    let g = task.goal_offset;
    let s = task.slack();
    let pos = if rng.random_bool(0.4) {
        [
            g[0] + rng.random_range(-s..=s),
            g[1] + rng.random_range(-s..=s),
            rng.random_range(-19.5e-3..-1e-5),
        ]
    } else {
        [
            g[0] + rng.random_range(-6e-3..6e-3),
            g[1] + rng.random_range(-6e-3..6e-3),
            rng.random_range(0.0..4e-3),
        ]
    };
    let d = [(); 3].map(|_| rng.random_range(-2e-3..=2e-3));
    (pos, d)
}
