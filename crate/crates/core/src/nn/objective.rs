//! Ties the hinge loss to a concrete model: which weights are regularised
//! and how the penalty enters the gradients.

use super::graph::{Gradients, ModelGraph};
use super::loss::{HingeLossConfig, RegScope};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Layers whose weight matrices carry the L2 penalty.
pub fn regularized_layers<T: Scalar>(model: &ModelGraph<T>, scope: RegScope) -> Vec<usize> {
    match scope {
        RegScope::OutputLayer => model.output_layer().into_iter().collect(),
        RegScope::AllDense => model.dense_layers().collect(),
    }
}

pub fn regularized_weights<T: Scalar>(model: &ModelGraph<T>, scope: RegScope) -> Vec<&Tensor<T>> {
    regularized_layers(model, scope)
        .into_iter()
        .filter_map(|i| model.layers()[i].params().map(|(w, _)| w))
        .collect()
}

/// Adds `d/dW (lambda / p * ||W||^2) * weight` to `grads`.
pub fn add_regularization_grad<T: Scalar>(
    grads: &mut Gradients<T>,
    model: &ModelGraph<T>,
    config: &HingeLossConfig,
    batch: usize,
    weight: T,
) {
    if config.l2_lambda == 0.0 {
        return;
    }
    let coef = T::from_f64_lossy(2.0 * config.l2_lambda / batch as f64) * weight;
    for i in regularized_layers(model, config.scope) {
        if let (Some(g), Some((w, _))) = (grads.layers[i].as_mut(), model.layers()[i].params()) {
            g.weights.axpy(coef, w);
        }
    }
}
