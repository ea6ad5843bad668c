//! Frame-by-frame detection workflow: sample frames, split each into the
//! 4 x 3 grid, classify every tile, then continue, re-check a single hit on
//! an upscaled tile, or raise an alert.

mod events;
mod frames;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use events::{EventAction, EventSink, JsonLinesSink, PipelineEvent};
pub use frames::{sample_frames, Frame, FrameStream, SamplerConfig};

use crate::error::{Error, Result};
use crate::imaging::{resize, segment_default, RasterImage, ResizeFilter, FRAME_HEIGHT, FRAME_WIDTH, GRID_COLS, GRID_ROWS};
use crate::label::Label;
use crate::nn::ModelGraph;
use crate::scalar::Scalar;

pub const TILE_COUNT: usize = GRID_ROWS * GRID_COLS;

/// Anything that can label a 320 x 240 tile.
pub trait TileClassifier: Sync {
    fn classify_tile(&self, tile: &RasterImage) -> Result<(Label, f64)>;
}

impl<T: Scalar> TileClassifier for ModelGraph<T> {
    fn classify_tile(&self, tile: &RasterImage) -> Result<(Label, f64)> {
        let score = self.score(&tile.to_tensor())?;
        Ok((Label::from_score(score), score.as_f64()))
    }
}

impl<C: TileClassifier + ?Sized> TileClassifier for &C {
    fn classify_tile(&self, tile: &RasterImage) -> Result<(Label, f64)> {
        (**self).classify_tile(tile)
    }
}

/// Per-tile verdicts in row-major grid order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionArray {
    pub verdicts: Vec<bool>,
    pub scores: Vec<f64>,
}

impl DecisionArray {
    pub fn from_verdicts(verdicts: Vec<bool>) -> Self {
        let scores = verdicts.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect();
        Self { verdicts, scores }
    }

    pub fn fire_count(&self) -> usize {
        self.verdicts.iter().filter(|&&v| v).count()
    }

    pub fn fire_tiles(&self) -> Vec<usize> {
        self.verdicts.iter().enumerate().filter_map(|(i, &v)| v.then_some(i)).collect()
    }
}

/// Ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Continue,
    Reprocess(usize),
    Alert,
}

impl Decision {
    pub fn severity(self) -> u8 {
        match self {
            Decision::Continue => 0,
            Decision::Reprocess(_) => 1,
            Decision::Alert => 2,
        }
    }
}

/// No fire tiles: continue. One: re-check that tile. Two or more: alert.
pub fn decide(array: &DecisionArray) -> Decision {
    match array.fire_tiles().as_slice() {
        [] => Decision::Continue,
        [tile] => Decision::Reprocess(*tile),
        _ => Decision::Alert,
    }
}

fn full_frame(frame: &RasterImage) -> Result<std::borrow::Cow<'_, RasterImage>> {
    if frame.dims() == (FRAME_WIDTH, FRAME_HEIGHT) {
        return Ok(std::borrow::Cow::Borrowed(frame));
    }
    log::warn!("frame is {}x{}, resizing to {FRAME_WIDTH}x{FRAME_HEIGHT}", frame.width(), frame.height());
    Ok(std::borrow::Cow::Owned(resize(frame, FRAME_WIDTH, FRAME_HEIGHT, ResizeFilter::Bilinear)?))
}

/// Splits the frame into 12 tiles and classifies each. Frames of other sizes
/// are resized to 1280 x 720 first.
pub fn evaluate_frame(frame: &RasterImage, model: &impl TileClassifier) -> Result<DecisionArray> {
    let frame = full_frame(frame)?;
    let grid = segment_default(&frame)?;
    let results: Vec<(Label, f64)> =
        grid.tiles.par_iter().map(|t| model.classify_tile(t)).collect::<Result<_>>()?;
    Ok(DecisionArray {
        verdicts: results.iter().map(|(l, _)| l.is_fire()).collect(),
        scores: results.iter().map(|&(_, s)| s).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReprocessOutcome {
    pub confirmed: bool,
    /// Verdicts over the 12 sub-tiles of the upscaled tile.
    pub sub_array: DecisionArray,
}

/// Upscales tile `tile_index` to a full frame and evaluates it again;
/// confirmed when at least two sub-tiles are fire. Never recurses.
pub fn reprocess(frame: &RasterImage, tile_index: usize, model: &impl TileClassifier) -> Result<ReprocessOutcome> {
    if tile_index >= TILE_COUNT {
        return Err(Error::input(format!("tile index {tile_index} outside 0..{TILE_COUNT}")));
    }
    let frame = full_frame(frame)?;
    let grid = segment_default(&frame)?;
    let zoomed = resize(&grid.tiles[tile_index], FRAME_WIDTH, FRAME_HEIGHT, ResizeFilter::Bilinear)?;
    let sub_array = evaluate_frame(&zoomed, model)?;
    Ok(ReprocessOutcome { confirmed: sub_array.fire_count() >= 2, sub_array })
}

/// Runs every sampled frame through evaluate, decide and (for a single hit)
/// reprocess, emitting exactly one event per sampled frame.
pub fn run_pipeline(
    stream: &FrameStream,
    model: &impl TileClassifier,
    sampler: &SamplerConfig,
    sink: &mut dyn EventSink,
) -> Result<Vec<PipelineEvent>> {
    sampler.validate()?;
    let mut log = Vec::new();
    for frame in sample_frames(stream, sampler) {
        let image = frame.load()?;
        let decisions = evaluate_frame(&image, model)?;
        let (action, sub_decisions) = match decide(&decisions) {
            Decision::Continue => (EventAction::Continue, None),
            Decision::Alert => (EventAction::Alert { image_ref: frame.image_ref() }, None),
            Decision::Reprocess(tile) => {
                let outcome = reprocess(&image, tile, model)?;
                let image_ref = outcome.confirmed.then(|| frame.image_ref());
                (EventAction::Reprocessed { tile, confirmed: outcome.confirmed, image_ref }, Some(outcome.sub_array))
            }
        };
        let event = PipelineEvent {
            frame: frame.index,
            timestamp: frame.index as f64 / f64::from(sampler.fps),
            action,
            decisions,
            sub_decisions,
        };
        if event.is_alert() {
            log::warn!("fire alert at frame {}", event.frame);
        }
        if let Err(source) = sink.emit(&event) {
            return Err(Error::Sink { event: Box::new(event), source });
        }
        log.push(event);
    }
    Ok(log)
}
