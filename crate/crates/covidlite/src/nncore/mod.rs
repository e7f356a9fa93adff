//! Tensor and reverse-mode differentiation core.
//!
//! Every layer primitive of the network is implemented here as a pure
//! forward function plus a backward counterpart. The [`GradTape`] records
//! whatever each forward needs (inputs, pool argmaxes, dropout masks) and
//! [`Network::backward`] replays it in exact reverse order.
//!
//! Kernels are generic over [`Scalar`] so the training engine runs at f32
//! while [`gradcheck`] re-runs the same code at f64 against central finite
//! differences.

mod activation;
mod batchnorm;
mod conv;
mod count;
mod dense;
pub mod gradcheck;
mod loss;
mod network;
mod params;
mod pool;
mod tape;
mod tensor;

pub use activation::{dropout, dropout_backward, relu, relu_backward};
pub use batchnorm::{
    batchnorm_backward_infer, batchnorm_backward_train, batchnorm_infer, batchnorm_train, BnStats,
};
pub use conv::{
    conv2d, conv2d_backward, depthwise_conv2d, pointwise_conv2d, separable_conv2d,
    separable_conv2d_backward, Conv2dGrads, SepConv2dGrads,
};
pub use count::{dsc_param_count, DscParamCount};
pub use dense::{dense, dense_backward, DenseGrads};
pub use loss::{softmax, sparse_ce_loss};
pub use network::{Gradients, Layer, Network, ParamInfo};
pub use params::{BatchNormParams, ConvParams, DenseParams, SepConvParams};
pub use tape::GradTape;
pub use tensor::{Scalar, Tensor, TensorOf};

use thiserror::Error;

/// Errors from shape validation and loss bookkeeping.
#[derive(Debug, Error)]
pub enum NnError {
    /// Input/parameter shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// Batch dimension of zero.
    #[error("empty batch")]
    EmptyBatch,
    /// A class label outside [0, num_classes).
    #[error("label at index {index} out of range: {label} >= {classes}")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },
}
