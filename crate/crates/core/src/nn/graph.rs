use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::atomic::{AtomicU64, Ordering};

use super::conv::{conv2d_backward, conv2d_forward};
use super::dense::{dense_backward, dense_forward};
use super::layers::{Activation, Layer, LayerKind};
use super::pool::{maxpool2d_backward, maxpool2d_forward};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

/// Ordered layer stack over a fixed `[height, width, channels]` input.
#[derive(Debug)]
pub struct ModelGraph<T> {
    input_shape: [usize; 3],
    layers: Vec<Layer<T>>,
    // changes whenever parameters may have changed; ties caches to a model state
    stamp: u64,
}

impl<T: Scalar> Clone for ModelGraph<T> {
    fn clone(&self) -> Self {
        Self { input_shape: self.input_shape, layers: self.layers.clone(), stamp: fresh_stamp() }
    }
}

impl<T: Scalar> PartialEq for ModelGraph<T> {
    fn eq(&self, other: &Self) -> bool {
        self.input_shape == other.input_shape && self.layers == other.layers
    }
}

impl<T: Scalar> ModelGraph<T> {
    /// Checks that every layer accepts its predecessor's output.
    pub fn new(input_shape: [usize; 3], layers: Vec<Layer<T>>) -> Result<Self> {
        if input_shape.contains(&0) {
            return Err(Error::Build(format!("input shape {input_shape:?} has a zero dimension")));
        }
        let mut shape = input_shape.to_vec();
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.output_shape(&shape).ok_or_else(|| {
                Error::Build(format!("layer {i} ({}) cannot accept input of shape {shape:?}", layer.kind()))
            })?;
        }
        Ok(Self { input_shape, layers, stamp: fresh_stamp() })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Mutable parameter access. Any cache taken before this call becomes stale.
    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        self.stamp = fresh_stamp();
        &mut self.layers
    }

    /// Input shape followed by the output shape of every layer.
    pub fn shape_trace(&self) -> Vec<Vec<usize>> {
        let mut shapes = vec![self.input_shape.to_vec()];
        for layer in &self.layers {
            let next = layer.output_shape(shapes.last().unwrap()).expect("validated at construction");
            shapes.push(next);
        }
        shapes
    }

    pub fn output_shape(&self) -> Vec<usize> {
        self.shape_trace().pop().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Sets every weight and bias to zero.
    pub fn zero_params(&mut self) {
        for layer in self.layers_mut() {
            if let Some((w, b)) = layer.params_mut() {
                w.map_inplace(|_| T::zero());
                b.map_inplace(|_| T::zero());
            }
        }
    }

    /// Index of the last dense layer, which carries the output weights.
    pub fn output_layer(&self) -> Option<usize> {
        self.layers.iter().rposition(|l| l.kind() == LayerKind::Dense)
    }

    pub fn dense_layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers.iter().enumerate().filter(|(_, l)| l.kind() == LayerKind::Dense).map(|(i, _)| i)
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape() != self.input_shape {
            return Err(Error::input(format!(
                "model expects input {:?}, got {:?}",
                self.input_shape,
                input.shape()
            )));
        }
        Ok(())
    }

    fn step(layer: &Layer<T>, x: &Tensor<T>) -> Result<(Tensor<T>, Option<Vec<usize>>)> {
        Ok(match layer {
            Layer::Conv(c) => (conv2d_forward(x, c)?, None),
            Layer::Pool(p) => {
                let (y, arg) = maxpool2d_forward(x, p)?;
                (y, Some(arg))
            }
            Layer::Flatten => (x.clone().reshape(&[x.len()])?, None),
            Layer::Dense(d) => (dense_forward(x, d)?, None),
        })
    }

    /// Output tensor without keeping intermediates.
    pub fn predict(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for layer in &self.layers {
            x = Self::step(layer, &x)?.0;
        }
        Ok(x)
    }

    /// Raw score of a single-output model.
    pub fn score(&self, input: &Tensor<T>) -> Result<T> {
        let out = self.predict(input)?;
        if out.len() != 1 {
            return Err(Error::input(format!("model has {} outputs, expected 1", out.len())));
        }
        Ok(out[0])
    }

    /// Score plus the cache needed by [`ModelGraph::backward`].
    pub fn forward(&self, input: &Tensor<T>) -> Result<(T, ForwardCache<T>)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut argmax = Vec::with_capacity(self.layers.len());
        activations.push(input.clone());
        for layer in &self.layers {
            let (y, arg) = Self::step(layer, activations.last().unwrap())?;
            activations.push(y);
            argmax.push(arg);
        }
        let out = activations.last().unwrap();
        if out.len() != 1 {
            return Err(Error::input(format!("model has {} outputs, expected 1", out.len())));
        }
        let score = out[0];
        Ok((score, ForwardCache { stamp: self.stamp, activations, argmax }))
    }

    /// Reverse-mode gradients of a scalar loss given `d loss / d score`.
    pub fn backward(&self, cache: &ForwardCache<T>, score_grad: T) -> Result<Gradients<T>> {
        if cache.stamp != self.stamp || cache.activations.len() != self.layers.len() + 1 {
            return Err(Error::state("forward cache does not belong to the current model parameters"));
        }
        let mut grads: Vec<Option<ParamGrad<T>>> = vec![None; self.layers.len()];
        let mut upstream = Tensor::new(vec![1], vec![score_grad])?;
        let first_param = self.layers.iter().position(|l| l.params().is_some()).unwrap_or(0);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let output = &cache.activations[i + 1];
            upstream = match layer {
                Layer::Conv(c) => {
                    let g = conv2d_backward(input, output, &upstream, c, i > first_param)?;
                    grads[i] = Some(ParamGrad { weights: g.kernels, bias: g.bias });
                    match g.input {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                Layer::Pool(_) => {
                    let arg = cache.argmax[i].as_ref().ok_or_else(|| Error::state("missing pool argmax"))?;
                    maxpool2d_backward(input.shape(), arg, &upstream)?
                }
                Layer::Flatten => upstream.reshape(input.shape())?,
                Layer::Dense(d) => {
                    let g = dense_backward(input, output, &upstream, d)?;
                    grads[i] = Some(ParamGrad { weights: g.weights, bias: g.bias });
                    g.input
                }
            };
        }
        Ok(Gradients { layers: grads })
    }
}

/// Intermediate tensors of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    stamp: u64,
    activations: Vec<Tensor<T>>,
    argmax: Vec<Option<Vec<usize>>>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn activations(&self) -> &[Tensor<T>] {
        &self.activations
    }

    /// Hash of every ReLU on/off state and every pooling argmax. Two passes with
    /// equal fingerprints sit on the same linear piece of the network.
    pub fn pattern_fingerprint(&self, model: &ModelGraph<T>) -> u64 {
        let mut h = DefaultHasher::new();
        for (i, layer) in model.layers.iter().enumerate() {
            let relu = match layer {
                Layer::Conv(c) => c.activation == Activation::ReLU,
                Layer::Dense(d) => d.activation == Activation::ReLU,
                _ => false,
            };
            if relu {
                for v in self.activations[i + 1].data() {
                    (*v > T::zero()).hash(&mut h);
                }
            }
            if let Some(arg) = &self.argmax[i] {
                arg.hash(&mut h);
            }
        }
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

/// One `(weights, bias)` gradient pair per parameterised layer, `None` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Option<ParamGrad<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &ModelGraph<T>) -> Self {
        let layers = model
            .layers()
            .iter()
            .map(|l| {
                l.params().map(|(w, b)| ParamGrad { weights: Tensor::zeros(w.shape()), bias: Tensor::zeros(b.shape()) })
            })
            .collect();
        Self { layers }
    }

    /// Shape-congruence with the model's parameters.
    pub fn matches(&self, model: &ModelGraph<T>) -> bool {
        self.layers.len() == model.layers().len()
            && self.layers.iter().zip(model.layers()).all(|(g, l)| match (g, l.params()) {
                (Some(g), Some((w, b))) => g.weights.shape() == w.shape() && g.bias.shape() == b.shape(),
                (None, None) => true,
                _ => false,
            })
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: T, other: &Gradients<T>) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            if let (Some(a), Some(b)) = (a, b) {
                a.weights.axpy(alpha, &b.weights);
                a.bias.axpy(alpha, &b.bias);
            }
        }
    }

    pub fn scale(&mut self, alpha: T) {
        for g in self.layers.iter_mut().flatten() {
            g.weights.scale(alpha);
            g.bias.scale(alpha);
        }
    }

    /// First layer index holding a NaN or infinite entry.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.layers
            .iter()
            .position(|g| g.as_ref().is_some_and(|g| !g.weights.is_finite() || !g.bias.is_finite()))
    }

    pub fn max_abs(&self) -> T {
        self.layers.iter().flatten().fold(T::zero(), |m, g| m.max(g.weights.max_abs()).max(g.bias.max_abs()))
    }
}
