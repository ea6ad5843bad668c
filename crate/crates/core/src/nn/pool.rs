use super::layers::{PoolLayer, PoolMode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Max pooling over `[H, W, C]`. Returns the pooled tensor and, for each
/// output element, the flat input index that supplied the maximum (first
/// in scan order on ties).
pub fn maxpool2d_forward<T: Scalar>(input: &Tensor<T>, layer: &PoolLayer) -> Result<(Tensor<T>, Vec<usize>)> {
    let &[h, w, c] = input.shape() else {
        return Err(Error::input(format!("pool input must be [H, W, C], got {:?}", input.shape())));
    };
    let (out_h, out_w) = layer.output_dims(h, w).ok_or_else(|| {
        Error::input(format!("pool window {} larger than input {h}x{w}", layer.pool_size))
    })?;
    let (stride, offset) = match layer.mode {
        PoolMode::Downsample => (layer.stride, 0),
        PoolMode::Preserve => (1, (layer.pool_size - 1) / 2),
    };
    let x = input.data();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    let mut argmax = Vec::with_capacity(out_h * out_w * c);
    for oy in 0..out_h {
        let y0 = (oy * stride) as isize - offset as isize;
        let ys = y0.max(0) as usize..((y0 + layer.pool_size as isize).min(h as isize)) as usize;
        for ox in 0..out_w {
            let x0 = (ox * stride) as isize - offset as isize;
            let xs = x0.max(0) as usize..((x0 + layer.pool_size as isize).min(w as isize)) as usize;
            for ch in 0..c {
                let mut best = usize::MAX;
                let mut best_v = T::neg_infinity();
                for iy in ys.clone() {
                    for ix in xs.clone() {
                        let idx = (iy * w + ix) * c + ch;
                        if best == usize::MAX || x[idx] > best_v {
                            best = idx;
                            best_v = x[idx];
                        }
                    }
                }
                out.push(best_v);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![out_h, out_w, c], out)?, argmax))
}

/// Routes each output gradient to the input element that won the max.
pub(crate) fn maxpool2d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_output.len() {
        return Err(Error::state("pool backward: argmax cache does not match gradient"));
    }
    let mut dx = Tensor::zeros(input_shape);
    for (&i, &g) in argmax.iter().zip(grad_output.data()) {
        dx[i] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn down() -> PoolLayer {
        PoolLayer::new(2, 2, PoolMode::Downsample).unwrap()
    }

    #[test]
    fn max_of_four() {
        let input = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (out, arg) = maxpool2d_forward(&input, &down()).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1]);
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(arg, vec![3]);
    }

    #[test]
    fn constant_input_stays_constant() {
        for mode in [PoolMode::Downsample, PoolMode::Preserve] {
            let input = Tensor::filled(&[5, 6, 3], 0.3f64);
            let (out, _) = maxpool2d_forward(&input, &PoolLayer::new(2, 2, mode).unwrap()).unwrap();
            assert!(out.data().iter().all(|&v| v == 0.3));
        }
    }

    #[test]
    fn table1_shape() {
        let input = Tensor::<f32>::zeros(&[120, 160, 32]);
        let (out, _) = maxpool2d_forward(&input, &down()).unwrap();
        assert_eq!(out.shape(), &[60, 80, 32]);
        let keep = PoolLayer::new(2, 2, PoolMode::Preserve).unwrap();
        let (out, _) = maxpool2d_forward(&input, &keep).unwrap();
        assert_eq!(out.shape(), &[120, 160, 32]);
    }

    #[test]
    fn preserve_window_is_right_and_down() {
        // 2x2 single channel: each output is the max of itself, right and below neighbours
        let input = Tensor::new(vec![2, 2, 1], vec![1.0, 5.0, 3.0, 2.0]).unwrap();
        let keep = PoolLayer::new(2, 2, PoolMode::Preserve).unwrap();
        let (out, _) = maxpool2d_forward(&input, &keep).unwrap();
        assert_eq!(out.data(), &[5.0, 5.0, 3.0, 2.0]);
    }

    #[test]
    fn too_small_rejected() {
        let input = Tensor::<f64>::zeros(&[1, 4, 1]);
        assert!(matches!(maxpool2d_forward(&input, &down()), Err(Error::Input(_))));
    }

    #[test]
    fn backward_accumulates_overlaps() {
        let input = Tensor::new(vec![2, 2, 1], vec![1.0, 5.0, 3.0, 2.0]).unwrap();
        let keep = PoolLayer::new(2, 2, PoolMode::Preserve).unwrap();
        let (_, arg) = maxpool2d_forward(&input, &keep).unwrap();
        let g = Tensor::filled(&[2, 2, 1], 1.0);
        let dx = maxpool2d_backward(&[2, 2, 1], &arg, &g).unwrap();
        assert_eq!(dx.data(), &[0.0, 2.0, 1.0, 1.0]);
    }
}
