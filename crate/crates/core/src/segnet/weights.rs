//! Binary weights file.
//!
//! Little-endian throughout:
//!
//! ```text
//! "SEGW"  version:u32  input h,w,c:u32  layers:u32
//! per layer  kind:u8 (0 conv, 1 pool, 2 flatten, 3 dense) then
//!   conv     filters, channels, kernel, stride:u32  activation:u8
//!   pool     size, stride:u32  mode:u8 (0 downsample, 1 preserve)
//!   dense    inputs, outputs:u32  activation:u8 (0 relu, 1 linear)
//! values:u64  then that many f64, weights before bias, in layer order
//! crc64 (ECMA-182) of the payload bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crc::{Crc, CRC_64_ECMA_182};

use crate::error::{Error, Result};
use crate::nn::{Activation, ConvLayer, DenseLayer, Layer, ModelGraph, PoolLayer, PoolMode};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const WEIGHTS_MAGIC: [u8; 4] = *b"SEGW";
pub const WEIGHTS_VERSION: u32 = 1;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_ECMA_182);

fn u32_of(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v).map(u32::to_le_bytes).map_err(|_| Error::Weights(format!("dimension {v} exceeds u32")))
}

fn act_code(a: Activation) -> u8 {
    match a {
        Activation::ReLU => 0,
        Activation::Linear => 1,
    }
}

fn act_of(code: u8) -> Result<Activation> {
    match code {
        0 => Ok(Activation::ReLU),
        1 => Ok(Activation::Linear),
        c => Err(Error::Weights(format!("unknown activation code {c}"))),
    }
}

pub fn write_weights<T: Scalar>(model: &ModelGraph<T>, mut out: impl Write) -> Result<()> {
    let mut head = Vec::new();
    head.extend_from_slice(&WEIGHTS_MAGIC);
    head.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    for d in model.input_shape() {
        head.extend_from_slice(&u32_of(d)?);
    }
    head.extend_from_slice(&u32_of(model.layers().len())?);
    for layer in model.layers() {
        match layer {
            Layer::Conv(c) => {
                head.push(0);
                for v in [c.filters(), c.channels(), c.kernel_size(), c.stride] {
                    head.extend_from_slice(&u32_of(v)?);
                }
                head.push(act_code(c.activation));
            }
            Layer::Pool(p) => {
                head.push(1);
                head.extend_from_slice(&u32_of(p.pool_size)?);
                head.extend_from_slice(&u32_of(p.stride)?);
                head.push(match p.mode {
                    PoolMode::Downsample => 0,
                    PoolMode::Preserve => 1,
                });
            }
            Layer::Flatten => head.push(2),
            Layer::Dense(d) => {
                head.push(3);
                head.extend_from_slice(&u32_of(d.inputs())?);
                head.extend_from_slice(&u32_of(d.outputs())?);
                head.push(act_code(d.activation));
            }
        }
    }
    let count = model.param_count() as u64;
    head.extend_from_slice(&count.to_le_bytes());
    out.write_all(&head)?;

    let mut digest = CRC64.digest();
    let mut buf = Vec::with_capacity(8 * 4096);
    for (w, b) in model.layers().iter().filter_map(Layer::params) {
        for &v in w.data().iter().chain(b.data()) {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
            if buf.len() >= 8 * 4096 {
                digest.update(&buf);
                out.write_all(&buf)?;
                buf.clear();
            }
        }
    }
    digest.update(&buf);
    out.write_all(&buf)?;
    out.write_all(&digest.finalize().to_le_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn save_weights<T: Scalar>(model: &ModelGraph<T>, path: impl AsRef<Path>) -> Result<()> {
    write_weights(model, BufWriter::new(File::create(path)?))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Weights(format!("file truncated while reading {what} at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

fn build_err(e: Error) -> Error {
    Error::Weights(format!("manifest describes an invalid layer: {e}"))
}

pub fn read_weights<T: Scalar>(mut input: impl Read) -> Result<ModelGraph<T>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4, "magic")? != WEIGHTS_MAGIC {
        return Err(Error::Weights("bad magic, not a weights file".into()));
    }
    let version = cur.u32("version")? as u32;
    if version != WEIGHTS_VERSION {
        return Err(Error::Weights(format!("unsupported version {version}, expected {WEIGHTS_VERSION}")));
    }
    let input_shape = [cur.u32("input shape")?, cur.u32("input shape")?, cur.u32("input shape")?];
    let n_layers = cur.u32("layer count")?;
    let mut layers = Vec::with_capacity(n_layers.min(1024));
    for i in 0..n_layers {
        let what = format!("layer {i}");
        let layer = match cur.u8(&what)? {
            0 => {
                let (k, c, s, stride) = (cur.u32(&what)?, cur.u32(&what)?, cur.u32(&what)?, cur.u32(&what)?);
                let act = act_of(cur.u8(&what)?)?;
                if k.saturating_mul(c).saturating_mul(s).saturating_mul(s) > bytes.len() {
                    return Err(Error::Weights(format!("{what} declares more parameters than the file holds")));
                }
                Layer::Conv(ConvLayer::new(Tensor::zeros(&[k, c, s, s]), Tensor::zeros(&[k]), stride, act).map_err(build_err)?)
            }
            1 => {
                let (size, stride) = (cur.u32(&what)?, cur.u32(&what)?);
                let mode = match cur.u8(&what)? {
                    0 => PoolMode::Downsample,
                    1 => PoolMode::Preserve,
                    m => return Err(Error::Weights(format!("{what}: unknown pool mode {m}"))),
                };
                Layer::Pool(PoolLayer::new(size, stride, mode).map_err(build_err)?)
            }
            2 => Layer::Flatten,
            3 => {
                let (n, m) = (cur.u32(&what)?, cur.u32(&what)?);
                let act = act_of(cur.u8(&what)?)?;
                if n.saturating_mul(m) > bytes.len() {
                    return Err(Error::Weights(format!("{what} declares more parameters than the file holds")));
                }
                Layer::Dense(DenseLayer::zeros(n, m, act))
            }
            k => return Err(Error::Weights(format!("{what}: unknown layer kind {k}"))),
        };
        layers.push(layer);
    }
    let mut model = ModelGraph::new(input_shape, layers).map_err(build_err)?;
    let declared = cur.u64("payload length")?;
    let expected = model.param_count() as u64;
    if declared != expected {
        return Err(Error::Weights(format!(
            "payload declares {declared} values but the manifest needs {expected}"
        )));
    }
    let payload_len = usize::try_from(declared)
        .ok()
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::Weights("payload length overflows".into()))?;
    let payload = cur.take(payload_len, "payload")?;
    let stored = cur.u64("checksum")?;
    if cur.pos != bytes.len() {
        return Err(Error::Weights(format!("{} trailing bytes after checksum", bytes.len() - cur.pos)));
    }
    let actual = CRC64.checksum(payload);
    if stored != actual {
        return Err(Error::Weights(format!("checksum mismatch: stored {stored:016x}, computed {actual:016x}")));
    }
    let mut values = payload.chunks_exact(8).map(|c| T::from_f64_lossy(f64::from_le_bytes(c.try_into().unwrap())));
    for layer in model.layers_mut() {
        if let Some((w, b)) = layer.params_mut() {
            for v in w.data_mut().iter_mut().chain(b.data_mut()) {
                *v = values.next().expect("payload length checked");
            }
        }
    }
    Ok(model)
}

pub fn load_weights<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelGraph<T>> {
    read_weights(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segnet::{build_segnet, SegNetConfig};

    fn small() -> ModelGraph<f64> {
        let cfg = SegNetConfig { input_shape: [24, 32, 3], ..Default::default() }.with_seed(11);
        build_segnet(&cfg).unwrap()
    }

    fn encoded(m: &ModelGraph<f64>) -> Vec<u8> {
        let mut v = Vec::new();
        write_weights(m, &mut v).unwrap();
        v
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = small();
        let back: ModelGraph<f64> = read_weights(&encoded(&m)[..]).unwrap();
        for (a, b) in m.layers().iter().zip(back.layers()) {
            assert_eq!(a, b);
            if let (Some((wa, _)), Some((wb, _))) = (a.params(), b.params()) {
                assert!(wa.data().iter().zip(wb.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn header_layout() {
        let m = small();
        let bytes = encoded(&m);
        assert_eq!(&bytes[..4], b"SEGW");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 24);
        assert_eq!(u32::from_le_bytes(bytes[20..24].try_into().unwrap()), 9);
        let payload = 8 * m.param_count();
        let crc = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        let start = bytes.len() - 8 - payload;
        assert_eq!(crc, CRC64.checksum(&bytes[start..bytes.len() - 8]));
        assert_eq!(u64::from_le_bytes(bytes[start - 8..start].try_into().unwrap()), m.param_count() as u64);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encoded(&small());
        let err = |b: &[u8]| read_weights::<f64>(b).unwrap_err().to_string();

        let mut flipped = bytes.clone();
        let mid = bytes.len() - 100;
        flipped[mid] ^= 0x40;
        assert!(err(&flipped).contains("checksum"));

        assert!(err(&bytes[..bytes.len() - 3]).contains("truncated"));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(err(&magic).contains("magic"));

        let mut version = bytes.clone();
        version[4] = 2;
        assert!(err(&version).contains("version"));

        let mut extra = bytes.clone();
        extra.push(0);
        assert!(err(&extra).contains("trailing"));
    }

    #[test]
    fn length_disagreement() {
        let m = small();
        let mut bytes = encoded(&m);
        let start = bytes.len() - 8 - 8 * m.param_count() - 8;
        bytes[start..start + 8].copy_from_slice(&(m.param_count() as u64 + 1).to_le_bytes());
        let e = read_weights::<f64>(&bytes[..]).unwrap_err().to_string();
        assert!(e.contains("manifest needs"), "{e}");
    }

    #[test]
    fn f32_round_trip_and_file_io() {
        let cfg = SegNetConfig { input_shape: [24, 32, 3], ..Default::default() }.with_seed(2);
        let m: ModelGraph<f32> = build_segnet(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.segw");
        save_weights(&m, &path).unwrap();
        let back: ModelGraph<f32> = load_weights(&path).unwrap();
        assert_eq!(m, back);
    }
}
