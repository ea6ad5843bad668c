//! Labelled tile collections and the synthetic tile dataset generator.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    generate_scene, resize, Distractor, RasterImage, ResizeFilter, SyntheticScene, GRID_COLS, GRID_ROWS, TILE_HEIGHT,
    TILE_WIDTH,
};
use crate::label::Label;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub image: RasterImage,
    pub label: Label,
}

/// Where a synthetic tile came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TileOrigin {
    /// One cell of the 4 x 3 frame grid.
    Tile,
    /// A quarter-by-quarter sub-region of a tile upscaled to tile size, the
    /// view the re-processing step sees.
    Zoomed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileDatasetSpec {
    pub count: usize,
    pub fire_ratio: f64,
    /// Share of samples drawn as zoomed sub-regions.
    pub zoom_ratio: f64,
    /// Share of fire-free scenes rendered with fog or red foliage.
    pub distractor_ratio: f64,
    /// Minimum masked-fire share for a fire label; anything between zero and
    /// this is ambiguous and never sampled.
    pub min_fire_fraction: f64,
    pub seed: u64,
}

impl Default for TileDatasetSpec {
    fn default() -> Self {
        Self { count: 1000, fire_ratio: 0.5, zoom_ratio: 0.25, distractor_ratio: 0.5, min_fire_fraction: 0.01, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTile {
    pub sample: Sample,
    pub origin: TileOrigin,
    pub scene_seed: u64,
    pub distractor: Distractor,
    pub fire_fraction: f64,
}

/// Number of fire samples for a requested ratio, rounded to nearest.
pub fn fire_quota(count: usize, fire_ratio: f64) -> usize {
    ((count as f64 * fire_ratio.clamp(0.0, 1.0)).round() as usize).min(count)
}

struct Job {
    fire: bool,
    scene_has_fire: bool,
    zoomed: bool,
    distractor: Distractor,
    scene_seed: u64,
}

/// Samples per rendered frame; frames are expensive and a handful of
/// distinct tiles from each keeps generation quick. Burning frames have few
/// qualifying fire regions, so they serve fewer samples.
const FIRE_SAMPLES_PER_SCENE: usize = 2;
const CALM_SAMPLES_PER_SCENE: usize = 4;
const HARD_NEGATIVE_RATIO: f64 = 0.25;

/// Renders `spec.count` labelled tiles with exactly [`fire_quota`] fire
/// samples, in seeded random order.
pub fn synthesize_tiles(spec: &TileDatasetSpec) -> Result<Vec<SyntheticTile>> {
    for (name, v) in [
        ("fire_ratio", spec.fire_ratio),
        ("zoom_ratio", spec.zoom_ratio),
        ("distractor_ratio", spec.distractor_ratio),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::input(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if !(spec.min_fire_fraction > 0.0 && spec.min_fire_fraction <= 1.0) {
        return Err(Error::input(format!("min_fire_fraction must lie in (0, 1], got {}", spec.min_fire_fraction)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fires = fire_quota(spec.count, spec.fire_ratio);
    let mut labels: Vec<bool> = (0..spec.count).map(|i| i < fires).collect();
    labels.shuffle(&mut rng);

    // Group consecutive samples with the same scene kind so one render
    // serves several of them.
    let mut jobs: Vec<Vec<Job>> = Vec::new();
    for fire in [true, false] {
        let n = labels.iter().filter(|&&l| l == fire).count();
        let mut i = 0;
        while i < n {
            let distractor = if rng.random_bool(spec.distractor_ratio) {
                if rng.random_bool(0.5) {
                    Distractor::Fog
                } else {
                    Distractor::FallFoliage
                }
            } else {
                Distractor::None
            };
            let scene_seed = rng.random();
            // Some negatives come from burning scenes: fire-free tiles that may
            // still show smoke or glow at the edges.
            let scene_has_fire = fire || rng.random_bool(HARD_NEGATIVE_RATIO);
            let per_scene = if fire { FIRE_SAMPLES_PER_SCENE } else { CALM_SAMPLES_PER_SCENE };
            let take = per_scene.min(n - i);
            jobs.push(
                (0..take)
                    .map(|_| Job { fire, scene_has_fire, zoomed: rng.random_bool(spec.zoom_ratio), distractor, scene_seed })
                    .collect(),
            );
            i += take;
        }
    }

    let rendered: Vec<Vec<SyntheticTile>> =
        jobs.par_iter().map(|group| render_group(group, spec.min_fire_fraction)).collect::<Result<_>>()?;
    let mut by_label: [Vec<SyntheticTile>; 2] = [Vec::new(), Vec::new()];
    for tile in rendered.into_iter().flatten() {
        by_label[usize::from(tile.sample.label == Label::NonFire)].push(tile);
    }
    let [mut fire_tiles, mut calm_tiles] = by_label;
    fire_tiles.shuffle(&mut rng);
    calm_tiles.shuffle(&mut rng);
    let (mut f, mut c) = (fire_tiles.into_iter(), calm_tiles.into_iter());
    Ok(labels
        .into_iter()
        .map(|fire| if fire { f.next() } else { c.next() }.expect("one tile rendered per planned slot"))
        .collect())
}

/// Candidate crop rectangles `(x, y, w, h)` of a frame: every grid tile, or
/// every quarter-scale cell inside every tile.
fn regions(zoomed: bool) -> Vec<(usize, usize, usize, usize)> {
    let (tw, th) = (TILE_WIDTH, TILE_HEIGHT);
    let mut out = Vec::new();
    for r in 0..GRID_ROWS {
        for c in 0..GRID_COLS {
            if zoomed {
                let (sw, sh) = (tw / GRID_COLS, th / GRID_ROWS);
                for sr in 0..GRID_ROWS {
                    for sc in 0..GRID_COLS {
                        out.push((c * tw + sc * sw, r * th + sr * sh, sw, sh));
                    }
                }
            } else {
                out.push((c * tw, r * th, tw, th));
            }
        }
    }
    out
}

fn render_group(group: &[Job], min_fire: f64) -> Result<Vec<SyntheticTile>> {
    let first = &group[0];
    let mut rng = ChaCha8Rng::seed_from_u64(first.scene_seed.rotate_left(17));
    // A fire scene occasionally fails to give enough qualifying regions
    // (e.g. one small blob straddling tiles); reroll with a derived seed.
    for attempt in 0u64..16 {
        let seed = first.scene_seed.wrapping_add(attempt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let scene = generate_scene(seed, first.scene_has_fire, first.distractor);
        if let Some(tiles) = pick_regions(&scene, group, seed, min_fire, &mut rng)? {
            return Ok(tiles);
        }
    }
    Err(Error::state(format!("no qualifying regions for scene seed {}", first.scene_seed)))
}

fn pick_regions(
    scene: &SyntheticScene,
    group: &[Job],
    seed: u64,
    min_fire: f64,
    rng: &mut impl Rng,
) -> Result<Option<Vec<SyntheticTile>>> {
    let mut out = Vec::with_capacity(group.len());
    let mut used = Vec::new();
    for job in group {
        let mut candidates: Vec<_> = regions(job.zoomed)
            .into_iter()
            .map(|r| (r, scene.fire_fraction(r.0, r.1, r.2, r.3)))
            .filter(|&(r, f)| !used.contains(&r) && if job.fire { f >= min_fire } else { f == 0.0 })
            .collect();
        if candidates.is_empty() {
            return Ok(None);
        }
        let pick = rng.random_range(0..candidates.len());
        let ((x, y, w, h), fraction) = candidates.swap_remove(pick);
        used.push((x, y, w, h));
        let mut image = scene.image.crop(x, y, w, h)?;
        if job.zoomed {
            image = resize(&image, TILE_WIDTH, TILE_HEIGHT, ResizeFilter::Bilinear)?;
        }
        out.push(SyntheticTile {
            sample: Sample { image, label: if job.fire { Label::Fire } else { Label::NonFire } },
            origin: if job.zoomed { TileOrigin::Zoomed } else { TileOrigin::Tile },
            scene_seed: seed,
            distractor: job.distractor,
            fire_fraction: fraction,
        });
    }
    Ok(Some(out))
}

/// Deterministic shuffled split: returns `(train, validation)` index lists
/// with `round(n * val_fraction)` validation entries.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) {
        return Err(Error::input(format!("validation fraction must lie in [0, 1), got {val_fraction}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * val_fraction).round() as usize;
    let train = idx.split_off(n_val);
    Ok((train, idx))
}
