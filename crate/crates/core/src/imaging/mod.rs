//! Raster I/O, the 4 x 3 tiling, resizing, augmentation and synthetic scenes.

mod augment;
mod raster;
mod resize;
mod synth;
mod tiles;

pub use augment::{augment, augment_with, AugmentationSpec, FillMode};
pub use raster::{load_image, save_image, RasterImage};
pub use resize::{resize, ResizeFilter};
pub use synth::{generate_scene, render_scene, Distractor, FireBlob, SceneSpec, SyntheticScene, GENERATOR_VERSION};
pub use tiles::{
    reassemble, segment, segment_default, SegmentGrid, FRAME_HEIGHT, FRAME_WIDTH, GRID_COLS, GRID_ROWS, TILE_HEIGHT,
    TILE_WIDTH,
};
