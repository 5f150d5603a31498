use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use rand::Rng as _;

use super::GraspError;
use crate::rng::rng_from_seed;

/// Row-major grayscale image with intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, GraspError> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(GraspError::Shape(format!(
                "{width}x{height} image with {} pixels",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    /// Zero outside the image.
    pub fn get_or_zero(&self, x: i64, y: i64) -> f64 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            0.0
        } else {
            self.get(x as usize, y as usize)
        }
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Copy translated by `(dx, dy)` pixels; uncovered pixels are zero.
    pub fn shifted(&self, dx: i64, dy: i64) -> Self {
        let mut out = Self::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(x, y, self.get_or_zero(x as i64 - dx, y as i64 - dy));
            }
        }
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            pixels: self.pixels.iter().map(|p| p * k).collect(),
            ..self.clone()
        }
    }

    /// Smooth random texture: uniform noise averaged over a 3x3 window.
    pub fn textured(width: usize, height: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let noise: Vec<f64> = (0..width * height).map(|_| rng.random::<f64>()).collect();
        let raw = Self {
            width,
            height,
            pixels: noise,
        };
        let mut out = Self::zeros(width, height);
        for y in 0..height as i64 {
            for x in 0..width as i64 {
                let mut s = 0.0;
                let mut n = 0.0;
                for (oy, ox) in (-1..=1).flat_map(|oy| (-1..=1).map(move |ox| (oy, ox))) {
                    let (xx, yy) = (x + ox, y + oy);
                    if xx >= 0 && yy >= 0 && xx < width as i64 && yy < height as i64 {
                        s += raw.get(xx as usize, yy as usize);
                        n += 1.0;
                    }
                }
                out.set(x as usize, y as usize, s / n);
            }
        }
        out
    }

    /// Reads a portable graymap (plain or raw, 8 or 16 bit).
    pub fn read_pgm(path: &Path) -> Result<Self, GraspError> {
        let bytes = std::fs::read(path).map_err(|e| GraspError::Io(format!("{}: {e}", path.display())))?;
        Self::decode_pgm(&bytes)
    }

    pub fn decode_pgm(bytes: &[u8]) -> Result<Self, GraspError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Pnm)
            .map_err(|e| GraspError::Io(e.to_string()))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let pixels = match img {
            DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
            DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
            other => {
                return Err(GraspError::Io(format!(
                    "expected a graymap, got {:?}",
                    other.color()
                )))
            }
        };
        Self::new(w, h, pixels)
    }

    /// Writes a raw 16-bit graymap.
    pub fn write_pgm(&self, path: &Path) -> Result<(), GraspError> {
        let data: Vec<u16> = self
            .pixels
            .iter()
            .map(|p| (p.clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect();
        let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, data).expect("size matches");
        buf.save_with_format(path, ImageFormat::Pnm)
            .map_err(|e| GraspError::Io(format!("{}: {e}", path.display())))
    }
}
