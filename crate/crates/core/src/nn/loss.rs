//! Soft-margin SVM objective on the raw output score.
//!
//! `lambda / p * ||w||^2 + C * sum_i max(0, 1 - y_i * s_i)^2` where `w` is the
//! regularised weight set, `p` the batch size, `y_i` in {-1, +1}.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HingeKind {
    /// `max(0, 1 - y s)^2`, differentiable everywhere.
    Squared,
    /// `max(0, 1 - y s)`.
    Plain,
}

/// Which dense weights the L2 term covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegScope {
    OutputLayer,
    AllDense,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeLossConfig {
    pub penalty_c: f64,
    pub l2_lambda: f64,
    pub kind: HingeKind,
    pub scope: RegScope,
}

impl Default for HingeLossConfig {
    fn default() -> Self {
        Self { penalty_c: 1.0, l2_lambda: 0.01, kind: HingeKind::Squared, scope: RegScope::OutputLayer }
    }
}

impl HingeLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.penalty_c > 0.0 && self.penalty_c.is_finite()) {
            return Err(Error::input(format!("penalty C must be positive, got {}", self.penalty_c)));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::input(format!("l2 lambda must be non-negative, got {}", self.l2_lambda)));
        }
        Ok(())
    }

    /// Hinge residual contribution of one sample.
    pub fn margin_loss<T: Scalar>(&self, score: T, label: T) -> T {
        let r = (T::one() - label * score).max(T::zero());
        let c = T::from_f64_lossy(self.penalty_c);
        match self.kind {
            HingeKind::Squared => c * r * r,
            HingeKind::Plain => c * r,
        }
    }

    /// d(margin_loss)/d(score); the plain hinge uses the zero subgradient at the kink.
    pub fn margin_grad<T: Scalar>(&self, score: T, label: T) -> T {
        let r = (T::one() - label * score).max(T::zero());
        let c = T::from_f64_lossy(self.penalty_c);
        match self.kind {
            HingeKind::Squared => -(c + c) * label * r,
            HingeKind::Plain if r > T::zero() => -c * label,
            HingeKind::Plain => T::zero(),
        }
    }

    /// `lambda / p * sum ||w||^2`
    pub fn regularization<T: Scalar>(&self, weights: &[&Tensor<T>], batch: usize) -> T {
        let lambda = T::from_f64_lossy(self.l2_lambda);
        let p = T::from_usize(batch).unwrap();
        lambda / p * weights.iter().map(|w| w.sum_squares()).sum::<T>()
    }
}

fn check_labels<T: Scalar>(scores: &[T], labels: &[T]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::input("loss over an empty batch"));
    }
    if scores.len() != labels.len() {
        return Err(Error::input(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != T::one() && y != -T::one()) {
        return Err(Error::input(format!("label {bad} is not -1 or +1")));
    }
    Ok(())
}

/// Batch loss with the L2 term over `output_weights`.
pub fn l2svm_loss<T: Scalar>(
    scores: &[T],
    labels: &[T],
    output_weights: &Tensor<T>,
    config: &HingeLossConfig,
) -> Result<T> {
    l2svm_loss_multi(scores, labels, &[output_weights], config)
}

/// Same as [`l2svm_loss`] with the L2 term summed over several weight tensors.
pub fn l2svm_loss_multi<T: Scalar>(
    scores: &[T],
    labels: &[T],
    weights: &[&Tensor<T>],
    config: &HingeLossConfig,
) -> Result<T> {
    config.validate()?;
    check_labels(scores, labels)?;
    let data: T = scores.iter().zip(labels).map(|(&s, &y)| config.margin_loss(s, y)).sum();
    Ok(config.regularization(weights, scores.len()) + data)
}

/// Per-sample d(loss)/d(score).
pub fn l2svm_score_grads<T: Scalar>(scores: &[T], labels: &[T], config: &HingeLossConfig) -> Result<Vec<T>> {
    config.validate()?;
    check_labels(scores, labels)?;
    Ok(scores.iter().zip(labels).map(|(&s, &y)| config.margin_grad(s, y)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_w() -> Tensor<f64> {
        Tensor::zeros(&[16, 1])
    }

    fn cfg(c: f64) -> HingeLossConfig {
        HingeLossConfig { penalty_c: c, ..Default::default() }
    }

    #[test]
    fn on_margin_is_zero() {
        assert_eq!(l2svm_loss(&[1.0], &[1.0], &zero_w(), &cfg(1.0)).unwrap(), 0.0);
    }

    #[test]
    fn zero_score_costs_one() {
        assert_eq!(l2svm_loss(&[0.0], &[1.0], &zero_w(), &cfg(1.0)).unwrap(), 1.0);
    }

    #[test]
    fn wrong_side_squared() {
        assert_eq!(l2svm_loss(&[-1.0], &[1.0], &zero_w(), &cfg(2.0)).unwrap(), 8.0);
    }

    #[test]
    fn plain_hinge_variant() {
        let c = HingeLossConfig { kind: HingeKind::Plain, ..cfg(2.0) };
        assert_eq!(l2svm_loss(&[-1.0], &[1.0], &zero_w(), &c).unwrap(), 4.0);
    }

    #[test]
    fn regularization_divides_by_batch() {
        let w = Tensor::from_vec(vec![1.0, 2.0]);
        let c = HingeLossConfig { l2_lambda: 0.5, ..cfg(1.0) };
        // all samples beyond the margin: only 0.5 / 2 * 5 remains
        let loss = l2svm_loss(&[3.0, -2.0], &[1.0, -1.0], &w, &c).unwrap();
        assert_eq!(loss, 1.25);
    }

    #[test]
    fn rejects_bad_batches() {
        assert!(l2svm_loss::<f64>(&[], &[], &zero_w(), &cfg(1.0)).is_err());
        assert!(l2svm_loss(&[0.2], &[0.0], &zero_w(), &cfg(1.0)).is_err());
        assert!(l2svm_loss(&[0.2, 0.1], &[1.0], &zero_w(), &cfg(1.0)).is_err());
        assert!(l2svm_loss(&[0.2], &[1.0], &zero_w(), &cfg(0.0)).is_err());
    }

    #[test]
    fn score_grad_matches_difference() {
        let c = cfg(1.5);
        for &(s, y) in &[(0.3f64, 1.0f64), (-0.7, 1.0), (0.2, -1.0), (2.0, 1.0)] {
            let g = l2svm_score_grads(&[s], &[y], &c).unwrap()[0];
            let h = 1e-6;
            let num = (c.margin_loss(s + h, y) - c.margin_loss(s - h, y)) / (2.0 * h);
            assert!((g - num).abs() < 1e-7, "{g} vs {num}");
        }
    }
}
