//! The tile classifier: a fixed conv/pool stack, two hidden dense layers and
//! a single linear output unit scored with the squared-hinge loss.

mod train;
mod weights;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use train::{evaluate, train, EnhancementFlags, EpochRecord, TrainOptions, TrainingHistory};
pub use weights::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use crate::error::{Error, Result};
use crate::imaging::{RasterImage, TILE_HEIGHT, TILE_WIDTH};
use crate::label::Label;
use crate::nn::{same_padding, Activation, ConvLayer, DenseLayer, HingeLossConfig, Layer, LayerKind, ModelGraph, PoolLayer, PoolMode};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// One entry of the feature-extraction stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureLayer {
    Conv { filters: usize },
    Pool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegNetConfig {
    /// `[height, width, channels]`
    pub input_shape: [usize; 3],
    pub features: Vec<FeatureLayer>,
    pub kernel: usize,
    pub conv_stride: usize,
    pub pool_size: usize,
    pub pool_stride: usize,
    pub pool_mode: PoolMode,
    pub dense_units: Vec<usize>,
    pub output_units: usize,
    pub loss: HingeLossConfig,
    pub seed: u64,
}

impl Default for SegNetConfig {
    fn default() -> Self {
        Self {
            input_shape: [TILE_HEIGHT, TILE_WIDTH, 3],
            features: feature_stack(5),
            kernel: 3,
            conv_stride: 2,
            pool_size: 2,
            pool_stride: 2,
            pool_mode: PoolMode::Downsample,
            dense_units: vec![16, 16],
            output_units: 1,
            loss: HingeLossConfig::default(),
            seed: 0,
        }
    }
}

/// Feature stack with `layers` entries: conv 32, pool, conv 64, pool, conv 128,
/// then alternating pool and filter-doubling conv.
pub fn feature_stack(layers: usize) -> Vec<FeatureLayer> {
    let mut filters = 32;
    (0..layers)
        .map(|i| {
            if i % 2 == 0 {
                let f = FeatureLayer::Conv { filters };
                filters *= 2;
                f
            } else {
                FeatureLayer::Pool
            }
        })
        .collect()
}

impl SegNetConfig {
    pub fn with_pool_mode(mut self, mode: PoolMode) -> Self {
        self.pool_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Filter counts of the conv layers in order.
    pub fn conv_filters(&self) -> Vec<usize> {
        self.features
            .iter()
            .filter_map(|f| match f {
                FeatureLayer::Conv { filters } => Some(*filters),
                FeatureLayer::Pool => None,
            })
            .collect()
    }

    fn layer_plan<T: Scalar>(&self) -> Result<Vec<Layer<T>>> {
        if self.output_units != 1 {
            return Err(Error::Build(format!("binary classifier needs 1 output unit, got {}", self.output_units)));
        }
        if self.kernel == 0 || self.conv_stride == 0 || self.features.is_empty() {
            return Err(Error::Build("kernel, stride and feature stack must be non-empty".into()));
        }
        let mut layers = Vec::new();
        let mut shape = self.input_shape.to_vec();
        let mut channels = self.input_shape[2];
        for f in &self.features {
            let layer = match *f {
                FeatureLayer::Conv { filters } => {
                    if filters == 0 {
                        return Err(Error::Build("conv layer with zero filters".into()));
                    }
                    let l = ConvLayer::zeros(filters, channels, self.kernel, self.conv_stride, Activation::ReLU);
                    channels = filters;
                    Layer::Conv(l)
                }
                FeatureLayer::Pool => Layer::Pool(
                    PoolLayer::new(self.pool_size, self.pool_stride, self.pool_mode).map_err(|e| Error::Build(e.to_string()))?,
                ),
            };
            shape = layer.output_shape(&shape).ok_or_else(|| {
                Error::Build(format!("feature map {shape:?} collapses at layer {} ({})", layers.len(), layer.kind()))
            })?;
            layers.push(layer);
        }
        layers.push(Layer::Flatten);
        let mut width: usize = shape.iter().product();
        for &units in &self.dense_units {
            if units == 0 {
                return Err(Error::Build("dense layer with zero units".into()));
            }
            layers.push(Layer::Dense(DenseLayer::zeros(width, units, Activation::ReLU)));
            width = units;
        }
        layers.push(Layer::Dense(DenseLayer::zeros(width, 1, Activation::Linear)));
        Ok(layers)
    }

    /// Length of the flattened feature map, computed from shapes alone.
    pub fn flatten_size(&self) -> Result<usize> {
        let [mut h, mut w, mut c] = self.input_shape;
        if h == 0 || w == 0 || c == 0 || self.conv_stride == 0 {
            return Err(Error::Build(format!("input shape {:?} or stride is empty", self.input_shape)));
        }
        for (i, f) in self.features.iter().enumerate() {
            match *f {
                FeatureLayer::Conv { filters } => {
                    h = same_padding(h, self.kernel, self.conv_stride).0;
                    w = same_padding(w, self.kernel, self.conv_stride).0;
                    c = filters;
                }
                FeatureLayer::Pool => {
                    let pool = PoolLayer::new(self.pool_size, self.pool_stride, self.pool_mode)
                        .map_err(|e| Error::Build(e.to_string()))?;
                    (h, w) = pool
                        .output_dims(h, w)
                        .ok_or_else(|| Error::Build(format!("feature map {h}x{w} collapses at feature {i}")))?;
                }
            }
        }
        Ok(h * w * c)
    }

    /// Architecture with every parameter zero.
    pub fn build_zeroed<T: Scalar>(&self) -> Result<ModelGraph<T>> {
        ModelGraph::new(self.input_shape, self.layer_plan()?)
    }
}

/// Builds the network and draws weights uniformly with variance `2 / fan_in`
/// for ReLU layers and `1 / fan_in` for the linear output. Biases start at 0.
pub fn build_segnet<T: Scalar>(config: &SegNetConfig) -> Result<ModelGraph<T>> {
    let mut model = config.build_zeroed::<T>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for layer in model.layers_mut() {
        let (w, act, fan_in) = match layer {
            Layer::Conv(c) => {
                let fan = c.channels() * c.kernel_size() * c.kernel_size();
                (&mut c.kernels, c.activation, fan)
            }
            Layer::Dense(d) => {
                let fan = d.inputs();
                (&mut d.weights, d.activation, fan)
            }
            _ => continue,
        };
        let gain = if act == Activation::ReLU { 2.0 } else { 1.0 };
        let bound = (3.0 * gain / fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for v in w.data_mut() {
            *v = T::from_f64_lossy(dist.sample(&mut rng));
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerParams {
    pub index: usize,
    pub kind: LayerKind,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParamCount {
    pub layers: Vec<LayerParams>,
    pub total: usize,
}

/// Per-layer parameter counts: conv `k (c w h + 1)`, dense `n m + m`, others 0.
pub fn param_count<T: Scalar>(model: &ModelGraph<T>) -> ParamCount {
    let layers: Vec<_> = model
        .layers()
        .iter()
        .enumerate()
        .map(|(index, l)| LayerParams { index, kind: l.kind(), params: l.param_count() })
        .collect();
    let total = layers.iter().map(|l| l.params).sum();
    ParamCount { layers, total }
}

/// Sign rule on the raw score: `score >= 0` is fire.
pub fn classify<T: Scalar>(model: &ModelGraph<T>, tile: &Tensor<T>) -> Result<(Label, T)> {
    let score = model.score(tile)?;
    Ok((Label::from_score(score), score))
}

pub fn classify_image<T: Scalar>(model: &ModelGraph<T>, tile: &RasterImage) -> Result<(Label, T)> {
    classify(model, &tile.to_tensor())
}
