use super::graph::{Gradients, ModelGraph};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Momentum SGD with optional decoupled weight decay.
///
/// `v <- momentum * v - lr * (g + l2_lambda * param)`, `param <- param + v`.
#[derive(Debug, Clone)]
pub struct Sgd<T> {
    pub lr: T,
    pub momentum: T,
    pub l2_lambda: T,
    velocity: Option<Gradients<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(lr: T, momentum: T, l2_lambda: T) -> Result<Self> {
        if !(lr > T::zero()) {
            return Err(Error::input(format!("learning rate must be positive, got {lr}")));
        }
        if !(momentum >= T::zero() && momentum < T::one()) {
            return Err(Error::input(format!("momentum must lie in [0, 1), got {momentum}")));
        }
        if !(l2_lambda >= T::zero()) {
            return Err(Error::input(format!("weight decay must be non-negative, got {l2_lambda}")));
        }
        Ok(Self { lr, momentum, l2_lambda, velocity: None })
    }

    pub fn reset(&mut self) {
        self.velocity = None;
    }

    pub fn step(&mut self, model: &mut ModelGraph<T>, grads: &Gradients<T>) -> Result<()> {
        if !grads.matches(model) {
            return Err(Error::state("gradients are not shape-congruent with the model"));
        }
        if let Some(i) = grads.first_non_finite() {
            return Err(Error::state(format!(
                "non-finite gradient in layer {i} ({})",
                model.layers()[i].kind()
            )));
        }
        let velocity = match &mut self.velocity {
            Some(v) if v.matches(model) => v,
            Some(_) => return Err(Error::state("optimizer state belongs to a different model")),
            None => self.velocity.insert(Gradients::zeros_like(model)),
        };
        let (lr, mom, decay) = (self.lr, self.momentum, self.l2_lambda);
        for ((layer, g), v) in model.layers_mut().iter_mut().zip(&grads.layers).zip(&mut velocity.layers) {
            let (Some((w, b)), Some(g), Some(v)) = (layer.params_mut(), g, v) else {
                continue;
            };
            for (p, (gv, vv)) in [(w, (&g.weights, &mut v.weights)), (b, (&g.bias, &mut v.bias))] {
                for ((p, &g), v) in p.data_mut().iter_mut().zip(gv.data()).zip(vv.data_mut()) {
                    *v = mom * *v - lr * (g + decay * *p);
                    *p += *v;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layers::{Activation, DenseLayer, Layer};
    use crate::tensor::Tensor;

    fn scalar_model(w: f64) -> ModelGraph<f64> {
        let d = DenseLayer::new(Tensor::new(vec![1, 1], vec![w]).unwrap(), Tensor::zeros(&[1]), Activation::Linear)
            .unwrap();
        ModelGraph::new([1, 1, 1], vec![Layer::Flatten, Layer::Dense(d)]).unwrap()
    }

    fn grads_of(m: &ModelGraph<f64>, gw: f64) -> Gradients<f64> {
        let mut g = Gradients::zeros_like(m);
        g.layers[1].as_mut().unwrap().weights[0] = gw;
        g
    }

    fn weight(m: &ModelGraph<f64>) -> f64 {
        m.layers()[1].params().unwrap().0[0]
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut m = scalar_model(1.0);
        let g = grads_of(&m, 0.0);
        Sgd::new(0.1, 0.0, 0.0).unwrap().step(&mut m, &g).unwrap();
        assert_eq!(weight(&m), 1.0);
    }

    #[test]
    fn plain_step() {
        let mut m = scalar_model(1.0);
        let g = grads_of(&m, 0.5);
        Sgd::new(0.1, 0.0, 0.0).unwrap().step(&mut m, &g).unwrap();
        assert!((weight(&m) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn decay_only_step() {
        let mut m = scalar_model(1.0);
        let g = grads_of(&m, 0.0);
        Sgd::new(0.1, 0.0, 0.1).unwrap().step(&mut m, &g).unwrap();
        assert!((weight(&m) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn momentum_accumulates() {
        let mut m = scalar_model(0.0);
        let g = grads_of(&m, 1.0);
        let mut opt = Sgd::new(0.1, 0.5, 0.0).unwrap();
        opt.step(&mut m, &g).unwrap();
        opt.step(&mut m, &g).unwrap();
        // v1 = -0.1, v2 = -0.05 - 0.1
        assert!((weight(&m) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn non_finite_names_layer() {
        let mut m = scalar_model(1.0);
        let g = grads_of(&m, f64::NAN);
        let err = Sgd::new(0.1, 0.0, 0.0).unwrap().step(&mut m, &g).unwrap_err();
        assert!(matches!(&err, Error::State(msg) if msg.contains("layer 1")), "{err}");
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(Sgd::new(0.0, 0.0, 0.0).is_err());
        assert!(Sgd::new(0.1, 1.0, 0.0).is_err());
        assert!(Sgd::new(0.1, 0.0, -1.0).is_err());
    }
}
