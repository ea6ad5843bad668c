use std::borrow::Cow;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{load_image, save_image, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub keep_every: usize,
    pub fps: u32,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { keep_every: 20, fps: 60 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.keep_every == 0 || self.fps == 0 {
            return Err(Error::input("keep_every and fps must be positive"));
        }
        Ok(())
    }

    /// Sampled frames per second.
    pub fn effective_rate(&self) -> f64 {
        f64::from(self.fps) / self.keep_every as f64
    }
}

#[derive(Debug, Clone)]
enum Source {
    Memory(RasterImage),
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub index: usize,
    source: Source,
}

impl Frame {
    /// Pixels, read from disk for file-backed frames.
    pub fn load(&self) -> Result<Cow<'_, RasterImage>> {
        match &self.source {
            Source::Memory(img) => Ok(Cow::Borrowed(img)),
            Source::File(p) => Ok(Cow::Owned(load_image(p)?)),
        }
    }

    /// Reference to the complete frame for alerts: the file path, or
    /// `frame:<index>` for in-memory frames.
    pub fn image_ref(&self) -> String {
        match &self.source {
            Source::Memory(_) => format!("frame:{}", self.index),
            Source::File(p) => p.display().to_string(),
        }
    }
}

/// Ordered frames indexed `0, 1, 2, ...`.
#[derive(Debug, Clone)]
pub struct FrameStream {
    pub fps: u32,
    frames: Vec<Frame>,
}

impl FrameStream {
    pub fn new(fps: u32) -> Self {
        Self { fps, frames: Vec::new() }
    }

    pub fn from_images(images: impl IntoIterator<Item = RasterImage>, fps: u32) -> Self {
        let mut s = Self::new(fps);
        for img in images {
            s.push(img);
        }
        s
    }

    pub fn push(&mut self, image: RasterImage) {
        let index = self.frames.len();
        self.frames.push(Frame { index, source: Source::Memory(image) });
    }

    /// Frames from `dir`: files named by a frame number (`000040.ppm`),
    /// ordered numerically and loaded lazily.
    pub fn from_dir(dir: impl AsRef<Path>, fps: u32) -> Result<Self> {
        let mut numbered = Vec::new();
        for entry in std::fs::read_dir(dir.as_ref())? {
            let path = entry?.path();
            let Some(n) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u64>().ok()) else {
                continue;
            };
            if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ppm")) {
                numbered.push((n, path));
            }
        }
        numbered.sort();
        if let Some(w) = numbered.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::input(format!("duplicate frame number {}", w[0].0)));
        }
        if numbered.iter().enumerate().any(|(i, (n, _))| *n != i as u64) {
            log::warn!("frame numbers in {} are not contiguous from 0; using file order", dir.as_ref().display());
        }
        let frames = numbered
            .into_iter()
            .enumerate()
            .map(|(index, (_, p))| Frame { index, source: Source::File(p) })
            .collect();
        Ok(Self { fps, frames })
    }

    /// Writes every frame as `<index:06>.ppm`.
    pub fn save_to_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        std::fs::create_dir_all(dir.as_ref())?;
        for f in &self.frames {
            save_image(f.load()?.as_ref(), dir.as_ref().join(format!("{:06}.ppm", f.index)))?;
        }
        Ok(())
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Frames whose index is a multiple of `keep_every`. A zero `keep_every`
/// is treated as 1.
pub fn sample_frames<'a>(stream: &'a FrameStream, config: &SamplerConfig) -> Vec<&'a Frame> {
    let k = config.keep_every.max(1);
    stream.frames.iter().filter(|f| f.index % k == 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(n: usize) -> FrameStream {
        FrameStream::from_images((0..n).map(|_| RasterImage::filled(4, 4, [0; 3])), 60)
    }

    #[test]
    fn three_per_second() {
        let s = stream(60);
        let cfg = SamplerConfig::default();
        let idx: Vec<_> = sample_frames(&s, &cfg).iter().map(|f| f.index).collect();
        assert_eq!(idx, vec![0, 20, 40]);
        assert_eq!(cfg.effective_rate(), 3.0);
    }

    #[test]
    fn keep_every_one_and_empty() {
        let s = stream(7);
        assert_eq!(sample_frames(&s, &SamplerConfig { keep_every: 1, fps: 60 }).len(), 7);
        assert!(sample_frames(&stream(0), &SamplerConfig::default()).is_empty());
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = FrameStream::new(30);
        for i in 0..3u8 {
            s.push(RasterImage::filled(4, 2, [i, i, i]));
        }
        s.save_to_dir(dir.path()).unwrap();
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let back = FrameStream::from_dir(dir.path(), 30).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in s.frames().iter().zip(back.frames()) {
            assert_eq!(a.load().unwrap(), b.load().unwrap());
        }
        assert!(back.frames()[2].image_ref().ends_with("000002.ppm"));
    }
}
