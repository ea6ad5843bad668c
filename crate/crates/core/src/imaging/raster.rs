use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// 8-bit RGB image, row-major, three bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::input(format!("image dims {width}x{height} must be positive")));
        }
        if pixels.len() != 3 * width * height {
            return Err(Error::input(format!(
                "{width}x{height} RGB image needs {} bytes, got {}",
                3 * width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0);
        let pixels = rgb.iter().copied().cycle().take(3 * width * height).collect();
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = 3 * (y * self.width + x);
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = 3 * (y * self.width + x);
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// Copy of the `w x h` block whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Self> {
        if w == 0 || h == 0 || x + w > self.width || y + h > self.height {
            return Err(Error::input(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(3 * w * h);
        for row in y..y + h {
            let start = 3 * (row * self.width + x);
            pixels.extend_from_slice(&self.pixels[start..start + 3 * w]);
        }
        Ok(Self { width: w, height: h, pixels })
    }

    /// Channel values scaled to `[0, 1]`, shape `[H, W, 3]`.
    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let scale = T::from_f64_lossy(255.0);
        let data = self.pixels.iter().map(|&b| T::from_u8(b).unwrap() / scale).collect();
        Tensor::new(vec![self.height, self.width, 3], data).expect("consistent dims")
    }

    pub fn encode_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    /// Parses a binary portable pixmap (`P6`, maxval 255).
    pub fn decode_ppm(bytes: &[u8]) -> Result<Self> {
        let mut cur = HeaderCursor { bytes, pos: 0 };
        let magic = cur.token()?;
        match magic {
            b"P6" => {}
            b"P1" | b"P2" | b"P3" | b"P4" | b"P5" | b"P7" => {
                return Err(Error::Format(format!(
                    "unsupported netpbm variant {}; only P6 is read",
                    String::from_utf8_lossy(magic)
                )))
            }
            _ => return Err(Error::Format("missing P6 magic".into())),
        }
        let width = cur.number("width")?;
        let height = cur.number("height")?;
        let maxval = cur.number("maxval")?;
        if width == 0 || height == 0 {
            return Err(Error::Format(format!("zero image dimension {width}x{height}")));
        }
        if maxval != 255 {
            return Err(Error::Format(format!("unsupported maxval {maxval}; only 255 is read")));
        }
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(Error::Format("header not terminated by whitespace".into())),
        }
        let need = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
        let body = &bytes[cur.pos..];
        if body.len() < need {
            return Err(Error::Format(format!("truncated raster: need {need} bytes, found {}", body.len())));
        }
        Ok(Self { width, height, pixels: body[..need].to_vec() })
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> HeaderCursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("malformed {what} {:?}", String::from_utf8_lossy(tok))))
    }
}

pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    RasterImage::decode_ppm(&fs::read(path)?)
}

pub fn save_image(image: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&image.encode_ppm())?;
    Ok(())
}
