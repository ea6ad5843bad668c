use serde::{Deserialize, Serialize};

use super::raster::RasterImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeFilter {
    #[default]
    Bilinear,
    Nearest,
}

/// Resamples with pixel centres at half-integer positions.
pub fn resize(image: &RasterImage, width: usize, height: usize, filter: ResizeFilter) -> Result<RasterImage> {
    if width == 0 || height == 0 {
        return Err(Error::input(format!("resize target {width}x{height} must be positive")));
    }
    if image.dims() == (width, height) {
        return Ok(image.clone());
    }
    let (sw, sh) = image.dims();
    let fx = sw as f64 / width as f64;
    let fy = sh as f64 / height as f64;
    let mut out = vec![0u8; 3 * width * height];
    match filter {
        ResizeFilter::Nearest => {
            let xs: Vec<usize> = (0..width).map(|x| (((x as f64 + 0.5) * fx) as usize).min(sw - 1)).collect();
            for y in 0..height {
                let sy = (((y as f64 + 0.5) * fy) as usize).min(sh - 1);
                for (x, &sx) in xs.iter().enumerate() {
                    let px = image.get(sx, sy);
                    out[3 * (y * width + x)..3 * (y * width + x) + 3].copy_from_slice(&px);
                }
            }
        }
        ResizeFilter::Bilinear => {
            let taps = |i: usize, f: f64, n: usize| {
                let s = ((i as f64 + 0.5) * f - 0.5).clamp(0.0, (n - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n - 1);
                (i0, i1, s - i0 as f64)
            };
            let xs: Vec<_> = (0..width).map(|x| taps(x, fx, sw)).collect();
            let src = image.pixels();
            for y in 0..height {
                let (y0, y1, wy) = taps(y, fy, sh);
                for (x, &(x0, x1, wx)) in xs.iter().enumerate() {
                    for c in 0..3 {
                        let p = |xx: usize, yy: usize| src[3 * (yy * sw + xx) + c] as f64;
                        let top = p(x0, y0) * (1.0 - wx) + p(x1, y0) * wx;
                        let bottom = p(x0, y1) * (1.0 - wx) + p(x1, y1) * wx;
                        let v = top * (1.0 - wy) + bottom * wy;
                        out[3 * (y * width + x) + c] = v.round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
    }
    RasterImage::new(width, height, out)
}
