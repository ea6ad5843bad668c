use super::raster::RasterImage;
use crate::error::{Error, Result};

pub const GRID_ROWS: usize = 3;
pub const GRID_COLS: usize = 4;
pub const FRAME_WIDTH: usize = 1280;
pub const FRAME_HEIGHT: usize = 720;
pub const TILE_WIDTH: usize = FRAME_WIDTH / GRID_COLS;
pub const TILE_HEIGHT: usize = FRAME_HEIGHT / GRID_ROWS;

/// Exact non-overlapping partition of an image into `rows x cols` equal tiles,
/// stored row-major: tile `(r, c)` sits at index `r * cols + c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentGrid {
    pub rows: usize,
    pub cols: usize,
    pub tiles: Vec<RasterImage>,
}

impl SegmentGrid {
    pub fn tile(&self, row: usize, col: usize) -> &RasterImage {
        &self.tiles[row * self.cols + col]
    }

    pub fn tile_dims(&self) -> (usize, usize) {
        self.tiles.first().map(RasterImage::dims).unwrap_or((0, 0))
    }

    pub fn source_dims(&self) -> (usize, usize) {
        let (w, h) = self.tile_dims();
        (w * self.cols, h * self.rows)
    }
}

pub fn segment(image: &RasterImage, rows: usize, cols: usize) -> Result<SegmentGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::input("grid needs at least one row and column"));
    }
    let (w, h) = image.dims();
    if w % cols != 0 || h % rows != 0 {
        return Err(Error::input(format!(
            "{w}x{h} image does not split evenly into {cols} columns and {rows} rows; resize first"
        )));
    }
    let (tw, th) = (w / cols, h / rows);
    let tiles = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .map(|(r, c)| image.crop(c * tw, r * th, tw, th))
        .collect::<Result<_>>()?;
    Ok(SegmentGrid { rows, cols, tiles })
}

/// The default 4 x 3 split of a 1280 x 720 frame into 320 x 240 tiles.
pub fn segment_default(image: &RasterImage) -> Result<SegmentGrid> {
    segment(image, GRID_ROWS, GRID_COLS)
}

pub fn reassemble(grid: &SegmentGrid) -> Result<RasterImage> {
    if grid.rows == 0 || grid.cols == 0 || grid.tiles.len() != grid.rows * grid.cols {
        return Err(Error::input(format!(
            "grid {}x{} has {} tiles",
            grid.rows,
            grid.cols,
            grid.tiles.len()
        )));
    }
    let (tw, th) = grid.tile_dims();
    if let Some((i, t)) = grid.tiles.iter().enumerate().find(|(_, t)| t.dims() != (tw, th)) {
        return Err(Error::input(format!("tile {i} is {:?}, expected {tw}x{th}", t.dims())));
    }
    let (w, h) = grid.source_dims();
    let mut pixels = vec![0u8; 3 * w * h];
    for (i, tile) in grid.tiles.iter().enumerate() {
        let (r, c) = (i / grid.cols, i % grid.cols);
        for y in 0..th {
            let dst = 3 * ((r * th + y) * w + c * tw);
            let src = 3 * y * tw;
            pixels[dst..dst + 3 * tw].copy_from_slice(&tile.pixels()[src..src + 3 * tw]);
        }
    }
    RasterImage::new(w, h, pixels)
}
