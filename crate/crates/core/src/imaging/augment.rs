//! Seeded photometric and geometric augmentation that keeps image dims.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::raster::RasterImage;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillMode {
    /// Exposed regions become black.
    #[default]
    Black,
    /// Exposed regions repeat the nearest edge pixel.
    EdgeReplicate,
}

/// Inclusive sampling ranges; a `(0, 0)` range disables that transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub rotation_deg: (f64, f64),
    /// Applied independently to x and y.
    pub translation_px: (f64, f64),
    /// Zoom factor is `1 + delta`.
    pub scale_delta: (f64, f64),
    pub brightness: (f64, f64),
    pub noise_sigma: f64,
    pub fill: FillMode,
    pub seed: u64,
}

impl AugmentationSpec {
    pub fn identity() -> Self {
        Self {
            rotation_deg: (0.0, 0.0),
            translation_px: (0.0, 0.0),
            scale_delta: (0.0, 0.0),
            brightness: (0.0, 0.0),
            noise_sigma: 0.0,
            fill: FillMode::Black,
            seed: 0,
        }
    }

    /// Mild setting used for training tiles.
    pub fn training_default() -> Self {
        Self {
            rotation_deg: (-15.0, 15.0),
            translation_px: (-24.0, 24.0),
            scale_delta: (-0.1, 0.15),
            brightness: (-20.0, 20.0),
            noise_sigma: 4.0,
            fill: FillMode::Black,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn sample(rng: &mut impl Rng, (lo, hi): (f64, f64)) -> f64 {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if !lo.is_finite() || !hi.is_finite() || lo == hi {
        return if lo.is_finite() { lo } else { 0.0 };
    }
    rng.random_range(lo..=hi)
}

pub fn augment(image: &RasterImage, spec: &AugmentationSpec) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    augment_with(image, spec, &mut rng)
}

/// Draws rotation, translation, scale, brightness and noise from `rng`, in that order.
pub fn augment_with(image: &RasterImage, spec: &AugmentationSpec, rng: &mut impl Rng) -> RasterImage {
    let angle = sample(rng, spec.rotation_deg).clamp(-180.0, 180.0).to_radians();
    let tx = sample(rng, spec.translation_px);
    let ty = sample(rng, spec.translation_px);
    let zoom = (1.0 + sample(rng, spec.scale_delta)).max(0.05);
    let delta = sample(rng, spec.brightness).clamp(-255.0, 255.0);

    let mut out = if angle != 0.0 || tx != 0.0 || ty != 0.0 || zoom != 1.0 {
        warp(image, angle, tx, ty, zoom, spec.fill)
    } else {
        image.clone()
    };

    if delta != 0.0 {
        for v in out.pixels_mut() {
            *v = (*v as f64 + delta).round().clamp(0.0, 255.0) as u8;
        }
    }

    let sigma = spec.noise_sigma.max(0.0);
    if sigma > 0.0 && sigma.is_finite() {
        let noise = Normal::new(0.0, sigma).expect("finite sigma");
        for v in out.pixels_mut() {
            *v = (*v as f64 + noise.sample(rng)).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

/// Rotation and zoom about the image centre followed by a shift, sampled
/// bilinearly through the inverse map.
fn warp(image: &RasterImage, angle: f64, tx: f64, ty: f64, zoom: f64, fill: FillMode) -> RasterImage {
    let (w, h) = image.dims();
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let (sin, cos) = angle.sin_cos();
    let mut out = RasterImage::filled(w, h, [0; 3]);
    let src = image.pixels();
    let at = |x: isize, y: isize, c: usize| -> Option<f64> {
        let (x, y) = match fill {
            FillMode::Black if x < 0 || y < 0 || x >= w as isize || y >= h as isize => return None,
            FillMode::Black => (x as usize, y as usize),
            FillMode::EdgeReplicate => (x.clamp(0, w as isize - 1) as usize, y.clamp(0, h as isize - 1) as usize),
        };
        Some(src[3 * (y * w + x) + c] as f64)
    };
    for y in 0..h {
        for x in 0..w {
            let dx = (x as f64 - cx - tx) / zoom;
            let dy = (y as f64 - cy - ty) / zoom;
            let sx = cos * dx + sin * dy + cx;
            let sy = -sin * dx + cos * dy + cy;
            let (x0, y0) = (sx.floor(), sy.floor());
            let (fx, fy) = (sx - x0, sy - y0);
            let (x0, y0) = (x0 as isize, y0 as isize);
            let mut px = [0u8; 3];
            for (c, slot) in px.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (ox, oy, wgt) in [(0, 0, (1.0 - fx) * (1.0 - fy)), (1, 0, fx * (1.0 - fy)), (0, 1, (1.0 - fx) * fy), (1, 1, fx * fy)] {
                    if wgt == 0.0 {
                        continue;
                    }
                    acc += wgt * at(x0 + ox, y0 + oy, c).unwrap_or(0.0);
                }
                *slot = acc.round().clamp(0.0, 255.0) as u8;
            }
            out.put(x, y, px);
        }
    }
    out
}
