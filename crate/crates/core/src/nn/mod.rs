//! Minimal CNN engine: conv / max-pool / flatten / dense layers, squared-hinge
//! SVM loss, momentum SGD and a finite-difference gradient checker.

mod conv;
mod dense;
mod gradcheck;
mod graph;
mod layers;
mod loss;
mod objective;
mod optim;
mod pool;

pub use conv::conv2d_forward;
pub use dense::dense_forward;
pub use gradcheck::{finite_difference_check, relative_error, GradCheckReport, LayerCheck, REL_ERROR_FLOOR, ROUNDOFF_HEADROOM};
pub use graph::{ForwardCache, Gradients, ModelGraph, ParamGrad};
pub use layers::{same_padding, Activation, ConvLayer, DenseLayer, Layer, LayerKind, Padding, PoolLayer, PoolMode};
pub use loss::{l2svm_loss, l2svm_loss_multi, l2svm_score_grads, HingeKind, HingeLossConfig, RegScope};
pub use objective::{add_regularization_grad, regularized_layers, regularized_weights};
pub use optim::Sgd;
pub use pool::maxpool2d_forward;
