use super::layers::{Activation, DenseLayer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `out_j = act(sum_i x_i * W[i, j] + b_j)`
pub fn dense_forward<T: Scalar>(input: &Tensor<T>, layer: &DenseLayer<T>) -> Result<Tensor<T>> {
    let (n, m) = (layer.inputs(), layer.outputs());
    if input.shape() != [n] {
        return Err(Error::input(format!("dense layer expects [{n}], got {:?}", input.shape())));
    }
    let mut out = layer.bias.data().to_vec();
    T::gemm(1, n, m, T::one(), input.data(), n as isize, 1, layer.weights.data(), m as isize, 1, T::one(), &mut out, m as isize, 1);
    if layer.activation == Activation::ReLU {
        for v in &mut out {
            *v = v.max(T::zero());
        }
    }
    Tensor::new(vec![m], out)
}

pub(crate) struct DenseGrads<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
    pub input: Tensor<T>,
}

pub(crate) fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    output: &Tensor<T>,
    grad_output: &Tensor<T>,
    layer: &DenseLayer<T>,
) -> Result<DenseGrads<T>> {
    let (n, m) = (layer.inputs(), layer.outputs());
    if input.len() != n || output.len() != m || grad_output.len() != m {
        return Err(Error::state("dense backward: cache does not match layer"));
    }
    let mut dz = grad_output.data().to_vec();
    if layer.activation == Activation::ReLU {
        for (d, &o) in dz.iter_mut().zip(output.data()) {
            if o <= T::zero() {
                *d = T::zero();
            }
        }
    }
    let x = input.data();
    let mut dw = vec![T::zero(); n * m];
    for (row, &xi) in dw.chunks_exact_mut(m).zip(x) {
        for (w, &d) in row.iter_mut().zip(&dz) {
            *w = xi * d;
        }
    }
    let mut dx = vec![T::zero(); n];
    for (xi, row) in dx.iter_mut().zip(layer.weights.data().chunks_exact(m)) {
        *xi = row.iter().zip(&dz).map(|(&w, &d)| w * d).sum();
    }
    Ok(DenseGrads {
        weights: Tensor::new(vec![n, m], dw)?,
        bias: Tensor::new(vec![m], dz)?,
        input: Tensor::new(vec![n], dx)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_map() {
        let mut w = Tensor::<f64>::zeros(&[3, 3]);
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        let layer = DenseLayer::new(w, Tensor::zeros(&[3]), Activation::Linear).unwrap();
        let x = Tensor::from_vec(vec![0.5, -2.0, 7.0]);
        assert_eq!(dense_forward(&x, &layer).unwrap().data(), x.data());
    }

    #[test]
    fn zero_input_returns_bias() {
        let layer = DenseLayer::new(
            Tensor::filled(&[4, 2], 3.0),
            Tensor::from_vec(vec![-1.5, 2.0]),
            Activation::Linear,
        )
        .unwrap();
        let out = dense_forward(&Tensor::zeros(&[4]), &layer).unwrap();
        assert_eq!(out.data(), &[-1.5, 2.0]);
    }

    #[test]
    fn hand_arithmetic() {
        let layer = DenseLayer::new(
            Tensor::new(vec![2, 1], vec![2.0, 3.0]).unwrap(),
            Tensor::from_vec(vec![-1.0]),
            Activation::Linear,
        )
        .unwrap();
        let out = dense_forward(&Tensor::from_vec(vec![1.0, 1.0]), &layer).unwrap();
        assert_eq!(out.data(), &[4.0]);
    }

    #[test]
    fn length_mismatch() {
        let layer = DenseLayer::<f64>::zeros(3, 1, Activation::Linear);
        assert!(dense_forward(&Tensor::zeros(&[2]), &layer).is_err());
    }

    #[test]
    fn affine_weight_gradient_is_outer_product() {
        let layer = DenseLayer::new(
            Tensor::new(vec![3, 1], vec![0.1, -0.2, 0.3]).unwrap(),
            Tensor::from_vec(vec![0.0]),
            Activation::Linear,
        )
        .unwrap();
        let x = Tensor::from_vec(vec![1.0, 2.0, -4.0]);
        let y = dense_forward(&x, &layer).unwrap();
        let g = dense_backward(&x, &y, &Tensor::from_vec(vec![-0.5]), &layer).unwrap();
        assert_eq!(g.weights.data(), &[-0.5, -1.0, 2.0]);
        assert_eq!(g.bias.data(), &[-0.5]);
    }
}
