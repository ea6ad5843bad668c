//! SAME-padded 2-d convolution over `[H, W, C]` tensors, lowered to a matrix product.

use super::layers::{same_padding, Activation, ConvLayer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy)]
struct Geometry {
    in_h: usize,
    in_w: usize,
    channels: usize,
    kernel: usize,
    stride: usize,
    out_h: usize,
    out_w: usize,
    pad_top: usize,
    pad_left: usize,
}

impl Geometry {
    fn new<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Self> {
        let &[in_h, in_w, channels] = input.shape() else {
            return Err(Error::input(format!("conv input must be [H, W, C], got {:?}", input.shape())));
        };
        if channels != layer.channels() {
            return Err(Error::input(format!(
                "conv input has {channels} channels, kernels expect {}",
                layer.channels()
            )));
        }
        let kernel = layer.kernel_size();
        let (out_h, pad_top) = same_padding(in_h, kernel, layer.stride);
        let (out_w, pad_left) = same_padding(in_w, kernel, layer.stride);
        Ok(Self { in_h, in_w, channels, kernel, stride: layer.stride, out_h, out_w, pad_top, pad_left })
    }

    fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Calls `f(row, col_in_patch, input_index)` for every in-bounds tap.
    /// Patch columns are ordered `(channel, ky, kx)` to line up with the
    /// `[filters, channels, kh, kw]` kernel layout.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let kk = self.kernel * self.kernel;
        for oy in 0..self.out_h {
            for ox in 0..self.out_w {
                let row = oy * self.out_w + ox;
                for ky in 0..self.kernel {
                    let iy = (oy * self.stride + ky) as isize - self.pad_top as isize;
                    if iy < 0 || iy >= self.in_h as isize {
                        continue;
                    }
                    for kx in 0..self.kernel {
                        let ix = (ox * self.stride + kx) as isize - self.pad_left as isize;
                        if ix < 0 || ix >= self.in_w as isize {
                            continue;
                        }
                        let base = (iy as usize * self.in_w + ix as usize) * self.channels;
                        for c in 0..self.channels {
                            f(row, c * kk + ky * self.kernel + kx, base + c);
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Scalar>(&self, input: &[T]) -> Vec<T> {
        let k = self.patch_len();
        let mut cols = vec![T::zero(); self.positions() * k];
        self.for_each_tap(|row, col, idx| cols[row * k + col] = input[idx]);
        cols
    }
}

/// Forward pass: bias plus kernel dot padded window, then the layer activation.
pub fn conv2d_forward<T: Scalar>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    let g = Geometry::new(input, layer)?;
    let cols = g.im2col(input.data());
    let (p, k, f) = (g.positions(), g.patch_len(), layer.filters());
    let mut out = Vec::with_capacity(p * f);
    for _ in 0..p {
        out.extend_from_slice(layer.bias.data());
    }
    // out[p x f] += cols[p x k] * kernels^T, kernels stored f x k
    T::gemm(
        p,
        k,
        f,
        T::one(),
        &cols,
        k as isize,
        1,
        layer.kernels.data(),
        1,
        k as isize,
        T::one(),
        &mut out,
        f as isize,
        1,
    );
    if layer.activation == Activation::ReLU {
        for v in &mut out {
            *v = v.max(T::zero());
        }
    }
    Tensor::new(vec![g.out_h, g.out_w, f], out)
}

pub(crate) struct ConvGrads<T> {
    pub kernels: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Option<Tensor<T>>,
}

/// Backward pass given the layer input, its (post-activation) output and the
/// gradient with respect to that output.
pub(crate) fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    output: &Tensor<T>,
    grad_output: &Tensor<T>,
    layer: &ConvLayer<T>,
    need_input_grad: bool,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(input, layer)?;
    let (p, k, f) = (g.positions(), g.patch_len(), layer.filters());
    if output.len() != p * f || grad_output.len() != p * f {
        return Err(Error::state("conv backward: cached output does not match layer geometry"));
    }
    let mut dz = grad_output.data().to_vec();
    if layer.activation == Activation::ReLU {
        for (d, &o) in dz.iter_mut().zip(output.data()) {
            if o <= T::zero() {
                *d = T::zero();
            }
        }
    }

    let mut bias = vec![T::zero(); f];
    for row in dz.chunks_exact(f) {
        for (b, &d) in bias.iter_mut().zip(row) {
            *b += d;
        }
    }

    let cols = g.im2col(input.data());
    // dK[f x k] = dz^T[f x p] * cols[p x k]
    let mut kernels = vec![T::zero(); f * k];
    T::gemm(f, p, k, T::one(), &dz, 1, f as isize, &cols, k as isize, 1, T::zero(), &mut kernels, k as isize, 1);

    let input_grad = if need_input_grad {
        // dcols[p x k] = dz[p x f] * kernels[f x k]
        let mut dcols = cols;
        T::gemm(
            p,
            f,
            k,
            T::one(),
            &dz,
            f as isize,
            1,
            layer.kernels.data(),
            k as isize,
            1,
            T::zero(),
            &mut dcols,
            k as isize,
            1,
        );
        let mut dx = vec![T::zero(); input.len()];
        g.for_each_tap(|row, col, idx| dx[idx] += dcols[row * k + col]);
        Some(Tensor::new(input.shape().to_vec(), dx)?)
    } else {
        None
    };

    Ok(ConvGrads {
        kernels: Tensor::new(layer.kernels.shape().to_vec(), kernels)?,
        bias: Tensor::new(vec![f], bias)?,
        input: input_grad,
    })
}
