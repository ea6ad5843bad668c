pub mod analysis;
pub mod dataset;
pub mod error;
pub mod imaging;
pub mod label;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod segnet;
pub mod tensor;

pub use error::{Error, Result};
pub use label::Label;
pub use scalar::Scalar;
pub use tensor::Tensor;

pub type Tensor32 = Tensor<f32>;
pub type Tensor64 = Tensor<f64>;
pub type ModelGraph32 = nn::ModelGraph<f32>;
pub type ModelGraph64 = nn::ModelGraph<f64>;
