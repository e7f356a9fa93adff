//! End-to-end pipeline for chest X-ray classification: image preprocessing
//! (percentile white balance + CLAHE), a depthwise-separable CNN with its own
//! reverse-mode differentiation core, Adam training with time-based decay,
//! a classification-metrics suite, and gradient-based explanation maps.
//!
//! The crate is organized by pipeline stage:
//!
//! - [`imaging`]: decode/encode, white balance, CLAHE, normalize + resize
//! - [`nncore`]: tensors, layer primitives with forward/backward, gradient checking
//! - [`model`]: the fixed CNN architecture, parameter accounting, weight files
//! - [`training`]: dataset splits, Adam, the training loop, k-fold cross-validation
//! - [`metrics`]: confusion matrix, per-class rates, kappa, ROC/AUC, Wilson intervals
//! - [`interpret`]: saliency maps, Grad-CAM, heatmap overlays
//!
//! All randomness flows from a single 64-bit seed through ChaCha8 streams
//! (see [`rng`]), so every run is reproducible bit for bit.

pub mod imaging;
pub mod model;
pub mod nncore;
pub mod rng;
pub mod training;

pub use imaging::{Image, NormalizedImage, PreprocessConfig};
pub use model::ModelState;
pub use nncore::Tensor;
pub use training::{DatasetIndex, TrainConfig};
