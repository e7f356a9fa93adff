//! The fixed CNN architecture: construction, parameter accounting, and
//! bit-exact weight persistence.

mod build;
mod io;
mod spec;
mod table;

pub use build::build_covidlite;
pub use io::{load_weights, save_weights, FORMAT_MAGIC, FORMAT_VERSION};
pub use spec::{covidlite_spec, ModelSpec, RowKind, RowMeta};
pub use table::{param_table, ParamTable, TableRow};

use thiserror::Error;

use crate::imaging::NormalizedImage;
use crate::nncore::{softmax, Network, NnError, Tensor};

/// Errors from model construction and weight persistence.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("num_classes must be 2 or 3, got {0}")]
    InvalidClassCount(usize),
    #[error("weight file i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a weight file (bad magic)")]
    BadMagic,
    #[error("unsupported weight format version {0}")]
    UnsupportedVersion(u32),
    #[error("weight file is truncated")]
    Truncated,
    #[error("weight file failed its CRC check")]
    CrcMismatch,
    #[error("weight file is missing tensor {0}")]
    MissingTensor(String),
    #[error("tensor {name} has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        found: Vec<usize>,
        expected: Vec<usize>,
    },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// A built model: the layer stack plus the metadata needed to rebuild and
/// persist it. Immutable during inference; training takes `&mut`.
#[derive(Debug, Clone)]
pub struct ModelState {
    network: Network<f32>,
    spec: ModelSpec,
    rows: Vec<RowMeta>,
    seed: u64,
}

impl ModelState {
    pub fn network(&self) -> &Network<f32> {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network<f32> {
        &mut self.network
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Table-row metadata recorded at build time.
    pub fn rows(&self) -> &[RowMeta] {
        &self.rows
    }

    pub fn num_classes(&self) -> usize {
        self.spec.num_classes
    }

    pub fn input_size(&self) -> usize {
        self.spec.input_size
    }

    /// Seed the parameters were initialized from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Inference logits for a batch shaped (n, input, input, 3).
    pub fn logits(&self, batch: &Tensor) -> Result<Tensor, NnError> {
        self.network.forward(batch)
    }

    /// Class probabilities for one preprocessed image.
    pub fn predict_probs(&self, img: &NormalizedImage) -> Result<Vec<f32>, NnError> {
        let size = self.spec.input_size;
        if img.height() != size || img.width() != size {
            return Err(NnError::Shape(format!(
                "expected a {size}x{size} input, got {}x{}",
                img.height(),
                img.width()
            )));
        }
        let x = image_to_tensor(img);
        let logits = self.network.forward(&x)?;
        Ok(softmax(&logits).data().to_vec())
    }
}

/// (1, h, w, 3) tensor view of a preprocessed image.
pub fn image_to_tensor(img: &NormalizedImage) -> Tensor {
    Tensor::from_vec(&[1, img.height(), img.width(), 3], img.data().to_vec())
}

/// Stacks preprocessed images of equal geometry into an (n, h, w, 3) batch.
pub fn batch_to_tensor(imgs: &[&NormalizedImage]) -> Tensor {
    assert!(!imgs.is_empty(), "empty batch");
    let (h, w) = (imgs[0].height(), imgs[0].width());
    let mut data = Vec::with_capacity(imgs.len() * h * w * 3);
    for img in imgs {
        assert_eq!((img.height(), img.width()), (h, w), "mixed geometries");
        data.extend_from_slice(img.data());
    }
    Tensor::from_vec(&[imgs.len(), h, w, 3], data)
}
