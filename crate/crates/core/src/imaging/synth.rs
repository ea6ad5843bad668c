//! Procedural forest scenes with optional fire clusters and look-alike
//! distractors. Output is a pure function of `(GENERATOR_VERSION, seed, spec)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::raster::RasterImage;
use super::tiles::{SegmentGrid, FRAME_HEIGHT, FRAME_WIDTH};
use crate::label::Label;

/// Bumped whenever rendering changes, so `(version, seed)` names a dataset.
pub const GENERATOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Distractor {
    #[default]
    None,
    Fog,
    FallFoliage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FireBlob {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub smoke: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub fires: Vec<FireBlob>,
    pub distractor: Distractor,
}

impl SceneSpec {
    pub fn background(seed: u64) -> Self {
        Self { width: FRAME_WIDTH, height: FRAME_HEIGHT, seed, fires: Vec::new(), distractor: Distractor::None }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub image: RasterImage,
    pub label: Label,
    /// Row-major, true where a fire pixel was drawn.
    pub fire_mask: Vec<bool>,
}

impl SyntheticScene {
    pub fn fire_fraction(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        let width = self.image.width();
        let hits: usize = (y..y + h).map(|r| self.fire_mask[r * width + x..r * width + x + w].iter().filter(|&&b| b).count()).sum();
        hits as f64 / (w * h) as f64
    }

    /// Fraction of fire pixels in every tile of a `rows x cols` split.
    pub fn tile_fire_fractions(&self, rows: usize, cols: usize) -> Vec<f64> {
        let (tw, th) = (self.image.width() / cols, self.image.height() / rows);
        (0..rows * cols).map(|i| self.fire_fraction((i % cols) * tw, (i / cols) * th, tw, th)).collect()
    }

    pub fn tile_fire_fractions_of(&self, grid: &SegmentGrid) -> Vec<f64> {
        self.tile_fire_fractions(grid.rows, grid.cols)
    }
}

/// Smooth 2-d value noise in `[0, 1]`.
struct ValueNoise {
    cell: f64,
    nx: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut impl Rng, width: usize, height: usize, cell: f64) -> Self {
        let cell = cell.max(1.0);
        let nx = (width as f64 / cell).ceil() as usize + 2;
        let ny = (height as f64 / cell).ceil() as usize + 2;
        let values = (0..nx * ny).map(|_| rng.random::<f64>()).collect();
        Self { cell, nx, values }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = ((x / self.cell).max(0.0), (y / self.cell).max(0.0));
        let (ix, iy) = (gx.floor() as usize, gy.floor() as usize);
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (fx, fy) = (smooth(gx - ix as f64), smooth(gy - iy as f64));
        let v = |i: usize, j: usize| self.values[j * self.nx + i];
        let top = v(ix, iy) * (1.0 - fx) + v(ix + 1, iy) * fx;
        let bottom = v(ix, iy + 1) * (1.0 - fx) + v(ix + 1, iy + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn to_px(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| v.round().clamp(0.0, 255.0) as u8)
}

/// Random scene at the default 1280 x 720 frame size: one to three fire
/// clusters when `with_fire`, plus the requested distractor.
pub fn generate_scene(seed: u64, with_fire: bool, distractor: Distractor) -> SyntheticScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_F12E);
    let mut spec = SceneSpec { distractor, ..SceneSpec::background(seed) };
    if with_fire {
        let clusters = rng.random_range(1..=3);
        for i in 0..clusters {
            let radius = if i == 0 { rng.random_range(40.0..90.0) } else { rng.random_range(15.0..70.0) };
            spec.fires.push(FireBlob {
                cx: rng.random_range(radius..FRAME_WIDTH as f64 - radius),
                cy: rng.random_range(radius..FRAME_HEIGHT as f64 - radius),
                radius,
                smoke: rng.random_bool(0.7),
            });
        }
    }
    render_scene(&spec)
}

pub fn render_scene(spec: &SceneSpec) -> SyntheticScene {
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scale = w as f64 / FRAME_WIDTH as f64;

    let canopy = ValueNoise::new(&mut rng, w, h, 64.0 * scale);
    let crowns = ValueNoise::new(&mut rng, w, h, 14.0 * scale);
    let soil = ValueNoise::new(&mut rng, w, h, 40.0 * scale);
    let light = rng.random_range(0.75..1.15);
    let dark = [18.0, 42.0, 20.0];
    let mid = [45.0, 90.0, 35.0];
    let bright = [85.0, 115.0, 50.0];
    let brown = [95.0, 80.0, 55.0];

    let mut img = RasterImage::filled(w, h, [0; 3]);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64, y as f64);
            let t = 0.6 * canopy.at(fx, fy) + 0.4 * crowns.at(fx, fy);
            let mut c = if t < 0.5 { lerp3(dark, mid, t * 2.0) } else { lerp3(mid, bright, t * 2.0 - 1.0) };
            let s = soil.at(fx, fy);
            if s > 0.68 {
                c = lerp3(c, brown, ((s - 0.68) * 4.0).min(1.0));
            }
            let jitter = rng.random_range(-10.0..10.0);
            img.put(x, y, to_px(c.map(|v| v * light + jitter)));
        }
    }

    if spec.distractor == Distractor::FallFoliage {
        paint_foliage(&mut img, &mut rng, scale, light.min(1.0));
    }

    let mut mask = vec![false; w * h];
    for blob in &spec.fires {
        if blob.smoke {
            paint_smoke(&mut img, &mut rng, blob);
        }
    }
    for blob in &spec.fires {
        paint_fire(&mut img, &mut mask, &mut rng, blob);
    }

    if spec.distractor == Distractor::Fog {
        let haze = ValueNoise::new(&mut rng, w, h, 160.0 * scale);
        let strength = rng.random_range(0.25..0.4);
        let fog = [190.0, 195.0, 205.0];
        for y in 0..h {
            for x in 0..w {
                let a = strength * (0.7 + 0.3 * haze.at(x as f64, y as f64));
                let p = img.get(x, y).map(f64::from);
                img.put(x, y, to_px(lerp3(p, fog, a)));
            }
        }
    }

    let label = if mask.iter().any(|&b| b) { Label::Fire } else { Label::NonFire };
    SyntheticScene { image: img, label, fire_mask: mask }
}

fn paint_foliage(img: &mut RasterImage, rng: &mut impl Rng, scale: f64, light: f64) {
    let (w, h) = img.dims();
    let patches = rng.random_range(3..=8);
    for _ in 0..patches {
        let r = rng.random_range(30.0..140.0) * scale;
        let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let base = [rng.random_range(150.0..195.0), rng.random_range(45.0..85.0), rng.random_range(15.0..35.0)];
        let edge = ValueNoise::new(rng, w, h, (r / 2.5).max(2.0));
        let x0 = (cx - 1.4 * r).max(0.0) as usize;
        let x1 = ((cx + 1.4 * r) as usize).min(w - 1);
        let y0 = (cy - 1.4 * r).max(0.0) as usize;
        let y1 = ((cy + 1.4 * r) as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if d < r * (0.6 + 0.8 * edge.at(x as f64, y as f64)) {
                    let j = rng.random_range(-12.0..12.0);
                    img.put(x, y, to_px(base.map(|v| v * light + j)));
                }
            }
        }
    }
}

fn paint_smoke(img: &mut RasterImage, rng: &mut impl Rng, blob: &FireBlob) {
    let (w, h) = img.dims();
    let height = 4.0 * blob.radius;
    let drift = rng.random_range(-0.6..0.6);
    let grey = rng.random_range(130.0..170.0);
    let puff = ValueNoise::new(rng, w, h, (blob.radius / 1.5).max(2.0));
    let y_top = (blob.cy - height).max(0.0) as usize;
    let y_bot = (blob.cy.max(0.0) as usize).min(h - 1);
    for y in y_top..=y_bot {
        let up = (blob.cy - y as f64) / height; // 0 at the fire, 1 at the top
        let centre = blob.cx + drift * up * height;
        let half = blob.radius * (0.8 + 1.5 * up);
        let x0 = (centre - half).max(0.0) as usize;
        let x1 = ((centre + half).max(0.0) as usize).min(w - 1);
        for x in x0..=x1 {
            let across = 1.0 - ((x as f64 - centre) / half).abs();
            let a = 0.75 * (1.0 - up).powf(0.7) * across.sqrt() * (0.4 + 0.6 * puff.at(x as f64, y as f64));
            if a > 0.0 {
                let p = img.get(x, y).map(f64::from);
                img.put(x, y, to_px(lerp3(p, [grey; 3], a)));
            }
        }
    }
}

fn paint_fire(img: &mut RasterImage, mask: &mut [bool], rng: &mut impl Rng, blob: &FireBlob) {
    let (w, h) = img.dims();
    let edge = ValueNoise::new(rng, w, h, (blob.radius / 2.0).max(2.0));
    let flicker = ValueNoise::new(rng, w, h, (blob.radius / 6.0).max(1.5));
    let reach = 1.25 * blob.radius;
    let x0 = (blob.cx - reach).max(0.0) as usize;
    let x1 = ((blob.cx + reach).max(0.0) as usize).min(w - 1);
    let y0 = (blob.cy - reach).max(0.0) as usize;
    let y1 = ((blob.cy + reach).max(0.0) as usize).min(h - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (fx, fy) = (x as f64, y as f64);
            let d = ((fx - blob.cx).powi(2) + (fy - blob.cy).powi(2)).sqrt();
            let r_eff = blob.radius * (0.7 + 0.5 * edge.at(fx, fy));
            if d >= r_eff {
                continue;
            }
            let t = (1.0 - d / r_eff) * (0.75 + 0.5 * flicker.at(fx, fy));
            let c = if t > 0.6 {
                [255.0, rng.random_range(228.0..250.0), rng.random_range(140.0..195.0)]
            } else if t > 0.3 {
                [255.0, rng.random_range(165.0..205.0), rng.random_range(35.0..75.0)]
            } else {
                [rng.random_range(235.0..250.0), rng.random_range(95.0..145.0), rng.random_range(15.0..40.0)]
            };
            img.put(x, y, to_px(c));
            mask[y * w + x] = true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_contract() {
        for seed in 0..4 {
            for d in [Distractor::None, Distractor::Fog, Distractor::FallFoliage] {
                assert_eq!(generate_scene(seed, false, d).label, Label::NonFire);
                assert_eq!(generate_scene(seed, true, d).label, Label::Fire);
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scene(7, true, Distractor::Fog);
        let b = generate_scene(7, true, Distractor::Fog);
        assert_eq!(a.image, b.image);
        assert_eq!(a.fire_mask, b.fire_mask);
        assert_ne!(a.image, generate_scene(8, true, Distractor::Fog).image);
        assert_eq!(a.image.dims(), (1280, 720));
    }
}
