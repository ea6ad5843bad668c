//! Central finite-difference verification of the analytic gradients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::graph::ModelGraph;
use super::layers::LayerKind;
use super::loss::{l2svm_loss_multi, HingeLossConfig};
use super::objective::{add_regularization_grad, regularized_weights};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Denominator floor for the relative error; gradients below it are compared
/// in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-8;

/// Multiplier on the unit round-off of the difference quotient,
/// `eps_machine * |L| / epsilon`. Gradients smaller than this scale cannot be
/// resolved to a 1e-5 relative error and are compared against it instead.
pub const ROUNDOFF_HEADROOM: f64 = 1e5;

#[derive(Debug, Clone, Serialize)]
pub struct LayerCheck {
    pub layer: usize,
    pub kind: LayerKind,
    pub checked: usize,
    /// Parameters whose perturbation flipped a ReLU or a pooling argmax.
    pub skipped_kinks: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub layers: Vec<LayerCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.layers.iter().map(|l| l.max_rel_error).fold(0.0, f64::max)
    }

    pub fn checked(&self) -> usize {
        self.layers.iter().map(|l| l.checked).sum()
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    relative_error_with_floor(analytic, numeric, REL_ERROR_FLOOR)
}

fn relative_error_with_floor(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

fn loss_and_pattern<T: Scalar>(
    model: &ModelGraph<T>,
    input: &Tensor<T>,
    label: T,
    config: &HingeLossConfig,
) -> Result<(f64, u64)> {
    let (score, cache) = model.forward(input)?;
    let loss = l2svm_loss_multi(&[score], &[label], &regularized_weights(model, config.scope), config)?;
    Ok((loss.as_f64(), cache.pattern_fingerprint(model)))
}

/// Compares analytic and `(L(p + eps) - L(p - eps)) / 2 eps` gradients for
/// up to `per_layer` randomly chosen parameters of every parameterised layer
/// (all of them when the layer has fewer). Parameters whose perturbation
/// crosses a ReLU kink or changes a pooling winner are excluded and counted.
pub fn finite_difference_check<T: Scalar>(
    model: &ModelGraph<T>,
    input: &Tensor<T>,
    label: T,
    config: &HingeLossConfig,
    epsilon: f64,
    per_layer: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(Error::input(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    let (score, cache) = model.forward(input)?;
    let base_pattern = cache.pattern_fingerprint(model);
    let dscore = config.margin_grad(score, label);
    let mut analytic = model.backward(&cache, dscore)?;
    add_regularization_grad(&mut analytic, model, config, 1, T::one());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let eps = T::from_f64_lossy(epsilon);
    let mut report = GradCheckReport { layers: Vec::new() };

    for (li, layer) in model.layers().iter().enumerate() {
        let Some((w, b)) = layer.params() else { continue };
        let grads = analytic.layers[li].as_ref().expect("gradient for parameterised layer");
        let mut candidates: Vec<(usize, usize)> =
            (0..w.len()).map(|i| (0, i)).chain((0..b.len()).map(|i| (1, i))).collect();
        candidates.shuffle(&mut rng);

        let mut check = LayerCheck { layer: li, kind: layer.kind(), checked: 0, skipped_kinks: 0, max_rel_error: 0.0 };
        for (which, idx) in candidates {
            if check.checked >= per_layer {
                break;
            }
            let original = if which == 0 { w[idx] } else { b[idx] };
            let mut eval = |value: T| -> Result<(f64, u64)> {
                {
                    let (pw, pb) = probe.layers_mut()[li].params_mut().unwrap();
                    if which == 0 {
                        pw[idx] = value;
                    } else {
                        pb[idx] = value;
                    }
                }
                loss_and_pattern(&probe, input, label, config)
            };
            let (plus, pat_plus) = eval(original + eps)?;
            let (minus, pat_minus) = eval(original - eps)?;
            eval(original)?;
            if pat_plus != base_pattern || pat_minus != base_pattern {
                check.skipped_kinks += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = if which == 0 { grads.weights[idx] } else { grads.bias[idx] }.as_f64();
            let roundoff = T::epsilon().as_f64() * plus.abs().max(minus.abs()) / epsilon * ROUNDOFF_HEADROOM;
            let err = relative_error_with_floor(a, numeric, roundoff.max(REL_ERROR_FLOOR));
            check.max_rel_error = check.max_rel_error.max(err);
            check.checked += 1;
        }
        report.layers.push(check);
    }
    Ok(report)
}
