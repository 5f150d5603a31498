use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{GraspError, GrayImage};

/// Border handling of the correlation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderMode {
    /// Outside pixels are zero (after mean-centering); all shifts with overlap.
    ZeroPadded,
    /// Images wrap around; shifts in `[-n/2, n - n/2)`.
    Cyclic,
}

/// Normalized correlation score for every integer shift `(dx, dy)`:
/// `sum_x a(x) b(x + d) / sqrt(sum a^2 * sum b^2)` with `a`, `b` the
/// mean-centered reference and query.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationSurface {
    pub min_dx: i64,
    pub min_dy: i64,
    pub cols: usize,
    pub rows: usize,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelOffset {
    pub dx: i64,
    pub dy: i64,
    pub score: f64,
}

impl CorrelationSurface {
    fn empty(mode: BorderMode, w: usize, h: usize) -> Self {
        match mode {
            BorderMode::ZeroPadded => Self {
                min_dx: -(w as i64 - 1),
                min_dy: -(h as i64 - 1),
                cols: 2 * w - 1,
                rows: 2 * h - 1,
                values: vec![0.0; (2 * w - 1) * (2 * h - 1)],
            },
            BorderMode::Cyclic => Self {
                min_dx: -((w / 2) as i64),
                min_dy: -((h / 2) as i64),
                cols: w,
                rows: h,
                values: vec![0.0; w * h],
            },
        }
    }

    fn index(&self, dx: i64, dy: i64) -> Option<usize> {
        let (c, r) = (dx - self.min_dx, dy - self.min_dy);
        (c >= 0 && r >= 0 && (c as usize) < self.cols && (r as usize) < self.rows)
            .then(|| r as usize * self.cols + c as usize)
    }

    pub fn get(&self, dx: i64, dy: i64) -> Option<f64> {
        self.index(dx, dy).map(|i| self.values[i])
    }

    pub fn shifts(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.rows as i64)
            .flat_map(move |r| (0..self.cols as i64).map(move |c| (c + self.min_dx, r + self.min_dy)))
    }

    /// Highest score; ties go to the smallest shift magnitude, then to the
    /// lexicographically smallest `(dx, dy)`.
    pub fn argmax(&self) -> PixelOffset {
        let key = |dx: i64, dy: i64| (dx * dx + dy * dy, dx, dy);
        let mut best: Option<PixelOffset> = None;
        for ((dx, dy), &v) in self.shifts().zip(&self.values) {
            let better = match best {
                None => true,
                Some(b) => v > b.score || (v == b.score && key(dx, dy) < key(b.dx, b.dy)),
            };
            if better {
                best = Some(PixelOffset { dx, dy, score: v });
            }
        }
        best.expect("surface is never empty")
    }
}

fn centered(img: &GrayImage) -> Result<(Vec<f64>, f64), GraspError> {
    let m = img.mean();
    let c: Vec<f64> = img.pixels.iter().map(|p| p - m).collect();
    let energy: f64 = c.iter().map(|v| v * v).sum();
    if energy <= 1e-24 * img.pixels.len() as f64 {
        return Err(GraspError::ConstantImage);
    }
    Ok((c, energy))
}

fn check_dims(a: &GrayImage, b: &GrayImage) -> Result<(), GraspError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(GraspError::Shape(format!(
            "reference {}x{} vs query {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Direct spatial-domain evaluation, `O(W^2 H^2)`.
pub fn cross_correlate_direct(
    reference: &GrayImage,
    query: &GrayImage,
    mode: BorderMode,
) -> Result<CorrelationSurface, GraspError> {
    check_dims(reference, query)?;
    let (w, h) = (reference.width as i64, reference.height as i64);
    let (a, ea) = centered(reference)?;
    let (b, eb) = centered(query)?;
    let norm = (ea * eb).sqrt();
    let mut surf = CorrelationSurface::empty(mode, reference.width, reference.height);
    let shifts: Vec<(i64, i64)> = surf.shifts().collect();
    for (k, (dx, dy)) in shifts.into_iter().enumerate() {
        let mut s = 0.0;
        for y in 0..h {
            for x in 0..w {
                let (qx, qy) = (x + dx, y + dy);
                let (qx, qy) = match mode {
                    BorderMode::ZeroPadded => {
                        if qx < 0 || qy < 0 || qx >= w || qy >= h {
                            continue;
                        }
                        (qx, qy)
                    }
                    BorderMode::Cyclic => (qx.rem_euclid(w), qy.rem_euclid(h)),
                };
                s += a[(y * w + x) as usize] * b[(qy * w + qx) as usize];
            }
        }
        surf.values[k] = s / norm;
    }
    Ok(surf)
}

fn fft2(data: &mut [Complex<f64>], rows: usize, cols: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let (row_fft, col_fft) = if inverse {
        (planner.plan_fft_inverse(cols), planner.plan_fft_inverse(rows))
    } else {
        (planner.plan_fft_forward(cols), planner.plan_fft_forward(rows))
    };
    for r in data.chunks_mut(cols) {
        row_fft.process(r);
    }
    let mut col = vec![Complex::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// Transform-domain evaluation of the same surface as
/// [`cross_correlate_direct`].
pub fn cross_correlate(
    reference: &GrayImage,
    query: &GrayImage,
    mode: BorderMode,
) -> Result<CorrelationSurface, GraspError> {
    check_dims(reference, query)?;
    let (w, h) = (reference.width, reference.height);
    let (a, ea) = centered(reference)?;
    let (b, eb) = centered(query)?;
    let (rows, cols) = match mode {
        BorderMode::ZeroPadded => (2 * h, 2 * w),
        BorderMode::Cyclic => (h, w),
    };
    let embed = |src: &[f64]| {
        let mut out = vec![Complex::new(0.0, 0.0); rows * cols];
        for y in 0..h {
            for x in 0..w {
                out[y * cols + x].re = src[y * w + x];
            }
        }
        out
    };
    let mut planner = FftPlanner::new();
    let mut fa = embed(&a);
    let mut fb = embed(&b);
    fft2(&mut fa, rows, cols, false, &mut planner);
    fft2(&mut fb, rows, cols, false, &mut planner);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = x.conj() * y;
    }
    fft2(&mut fa, rows, cols, true, &mut planner);
    let scale = 1.0 / ((rows * cols) as f64 * (ea * eb).sqrt());
    let mut surf = CorrelationSurface::empty(mode, w, h);
    let shifts: Vec<(i64, i64)> = surf.shifts().collect();
    for (k, (dx, dy)) in shifts.into_iter().enumerate() {
        let r = dy.rem_euclid(rows as i64) as usize;
        let c = dx.rem_euclid(cols as i64) as usize;
        surf.values[k] = fa[r * cols + c].re * scale;
    }
    Ok(surf)
}
