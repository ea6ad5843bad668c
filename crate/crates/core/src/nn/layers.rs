use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::ReLU => v.max(T::zero()),
            Activation::Linear => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Padding {
    /// Zero padding so that the output spatial size is `ceil(in / stride)`.
    Same,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    /// `pool_size` window moved by `stride`, no padding.
    Downsample,
    /// Window moved by one pixel over a SAME-padded input; spatial dims unchanged.
    Preserve,
}

/// Output size and leading pad for SAME padding along one axis.
pub fn same_padding(input: usize, kernel: usize, stride: usize) -> (usize, usize) {
    let out = input.div_ceil(stride);
    let total = ((out - 1) * stride + kernel).saturating_sub(input);
    (out, total / 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    /// `[filters, channels, kernel_h, kernel_w]`
    pub kernels: Tensor<T>,
    /// `[filters]`
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: Padding,
    pub activation: Activation,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(kernels: Tensor<T>, bias: Tensor<T>, stride: usize, activation: Activation) -> Result<Self> {
        let s = kernels.shape();
        if s.len() != 4 {
            return Err(Error::input(format!("conv kernels must be 4-d, got {s:?}")));
        }
        if s[2] != s[3] {
            return Err(Error::input(format!("conv kernels must be square, got {}x{}", s[2], s[3])));
        }
        if bias.shape() != [s[0]] {
            return Err(Error::input(format!("conv bias shape {:?} does not match {} filters", bias.shape(), s[0])));
        }
        if stride == 0 {
            return Err(Error::input("conv stride must be positive"));
        }
        Ok(Self { kernels, bias, stride, padding: Padding::Same, activation })
    }

    pub fn zeros(filters: usize, channels: usize, kernel: usize, stride: usize, activation: Activation) -> Self {
        Self::new(
            Tensor::zeros(&[filters, channels, kernel, kernel]),
            Tensor::zeros(&[filters]),
            stride,
            activation,
        )
        .expect("valid conv dims")
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_size(&self) -> usize {
        self.kernels.shape()[2]
    }

    pub fn output_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let k = self.kernel_size();
        (same_padding(h, k, self.stride).0, same_padding(w, k, self.stride).0)
    }

    pub fn param_count(&self) -> usize {
        self.filters() * (self.channels() * self.kernel_size() * self.kernel_size() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolLayer {
    pub pool_size: usize,
    pub stride: usize,
    pub mode: PoolMode,
}

impl PoolLayer {
    pub fn new(pool_size: usize, stride: usize, mode: PoolMode) -> Result<Self> {
        if pool_size == 0 || stride == 0 {
            return Err(Error::input("pool size and stride must be positive"));
        }
        Ok(Self { pool_size, stride, mode })
    }

    /// Output spatial dims, or `None` when the input is smaller than the window.
    pub fn output_dims(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        match self.mode {
            PoolMode::Preserve => Some((h, w)),
            PoolMode::Downsample => {
                if h < self.pool_size || w < self.pool_size {
                    None
                } else {
                    Some(((h - self.pool_size) / self.stride + 1, (w - self.pool_size) / self.stride + 1))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    /// `[inputs, outputs]`
    pub weights: Tensor<T>,
    /// `[outputs]`
    pub bias: Tensor<T>,
    pub activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>, activation: Activation) -> Result<Self> {
        let s = weights.shape();
        if s.len() != 2 {
            return Err(Error::input(format!("dense weights must be 2-d, got {s:?}")));
        }
        if bias.shape() != [s[1]] {
            return Err(Error::input(format!("dense bias shape {:?} does not match {} outputs", bias.shape(), s[1])));
        }
        Ok(Self { weights, bias, activation })
    }

    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self::new(Tensor::zeros(&[inputs, outputs]), Tensor::zeros(&[outputs]), activation).expect("valid dense dims")
    }

    pub fn inputs(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.inputs() * self.outputs() + self.outputs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(ConvLayer<T>),
    Pool(PoolLayer),
    Flatten,
    Dense(DenseLayer<T>),
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv(_) => LayerKind::Conv,
            Layer::Pool(_) => LayerKind::Pool,
            Layer::Flatten => LayerKind::Flatten,
            Layer::Dense(_) => LayerKind::Dense,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv(c) => c.param_count(),
            Layer::Dense(d) => d.param_count(),
            Layer::Pool(_) | Layer::Flatten => 0,
        }
    }

    /// `(weights, bias)` for parameterised layers.
    pub fn params(&self) -> Option<(&Tensor<T>, &Tensor<T>)> {
        match self {
            Layer::Conv(c) => Some((&c.kernels, &c.bias)),
            Layer::Dense(d) => Some((&d.weights, &d.bias)),
            _ => None,
        }
    }

    pub(crate) fn params_mut(&mut self) -> Option<(&mut Tensor<T>, &mut Tensor<T>)> {
        match self {
            Layer::Conv(c) => Some((&mut c.kernels, &mut c.bias)),
            Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
            _ => None,
        }
    }

    /// Output shape for a given input shape; `None` if the layer cannot accept it.
    pub fn output_shape(&self, input: &[usize]) -> Option<Vec<usize>> {
        match self {
            Layer::Conv(c) => match input {
                &[h, w, ch] if ch == c.channels() => {
                    let (oh, ow) = c.output_dims(h, w);
                    Some(vec![oh, ow, c.filters()])
                }
                _ => None,
            },
            Layer::Pool(p) => match input {
                &[h, w, ch] => p.output_dims(h, w).map(|(oh, ow)| vec![oh, ow, ch]),
                _ => None,
            },
            Layer::Flatten => Some(vec![input.iter().product()]),
            Layer::Dense(d) => match input {
                &[n] if n == d.inputs() => Some(vec![d.outputs()]),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pool,
    Flatten,
    Dense,
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
            LayerKind::Flatten => "flatten",
            LayerKind::Dense => "dense",
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_padding_matches_ceil() {
        assert_eq!(same_padding(240, 3, 2), (120, 0));
        assert_eq!(same_padding(15, 3, 2), (8, 1));
        assert_eq!(same_padding(5, 3, 1), (5, 1));
        assert_eq!(same_padding(1, 1, 1), (1, 0));
        // kernel smaller than stride leaves no padding
        assert_eq!(same_padding(4, 1, 2), (2, 0));
    }

    #[test]
    fn pool_dims() {
        let down = PoolLayer::new(2, 2, PoolMode::Downsample).unwrap();
        assert_eq!(down.output_dims(120, 160), Some((60, 80)));
        assert_eq!(down.output_dims(15, 20), Some((7, 10)));
        assert_eq!(down.output_dims(1, 4), None);
        let keep = PoolLayer::new(2, 2, PoolMode::Preserve).unwrap();
        assert_eq!(keep.output_dims(1, 1), Some((1, 1)));
    }

    #[test]
    fn conv_rejects_bad_bias() {
        let k = Tensor::<f64>::zeros(&[4, 3, 3, 3]);
        assert!(ConvLayer::new(k, Tensor::zeros(&[3]), 1, Activation::ReLU).is_err());
    }
}
