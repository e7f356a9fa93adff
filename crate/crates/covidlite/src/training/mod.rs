//! Dataset splitting, Adam with time-based decay, the training loop, and
//! k-fold cross-validation.

mod adam;
mod dataset;
mod fit;

pub use adam::AdamState;
pub use dataset::{
    kfold_partition, read_manifest, stratified_split, write_manifest, DatasetEntry, DatasetIndex,
};
pub use fit::{cross_validate, evaluate, fit, CvReport, EpochStats, EvalOutcome, History};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;
use crate::nncore::NnError;

/// Errors from dataset handling and the training loop.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("invalid dataset index: {0}")]
    Index(String),
    #[error("dataset is empty (or every file was unreadable)")]
    EmptyDataset,
    #[error("class {name:?} has too few samples for the requested split")]
    DegenerateSplit { name: String },
    #[error("dataset has {data} classes but the model expects {model}")]
    ClassCountMismatch { data: usize, model: usize },
    #[error("non-finite gradient in {name}")]
    NonFiniteGradient { name: String },
    #[error("manifest i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest parse failure on {path}: {message}")]
    Manifest { path: String, message: String },
    #[error(transparent)]
    Imaging(#[from] crate::imaging::ImagingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Knobs of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub seed: u64,
    pub num_classes: usize,
    pub k_folds: usize,
    pub split_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 8,
            initial_lr: 0.001,
            seed: 0,
            num_classes: 3,
            k_folds: 5,
            split_ratio: 0.8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs < 1 {
            return Err(TrainError::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(TrainError::Config("batch_size must be >= 1".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(TrainError::Config("initial_lr must be positive".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(TrainError::Config(
                "split_ratio must lie strictly between 0 and 1".into(),
            ));
        }
        if self.k_folds < 2 {
            return Err(TrainError::Config("k_folds must be >= 2".into()));
        }
        Ok(())
    }

    /// Time-based decay constant: initial learning rate over total epochs.
    pub fn decay(&self) -> f64 {
        self.initial_lr / self.epochs as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.epochs, 100);
        assert_eq!(cfg.batch_size, 8);
        assert_eq!(cfg.initial_lr, 0.001);
        assert_eq!(cfg.k_folds, 5);
        assert_eq!(cfg.split_ratio, 0.8);
        assert!((cfg.decay() - 1e-5).abs() < 1e-12);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = TrainConfig::default();
        cfg.split_ratio = 1.0;
        assert!(cfg.validate().is_err());
        cfg.split_ratio = 0.8;
        cfg.k_folds = 1;
        assert!(cfg.validate().is_err());
        cfg.k_folds = 5;
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }
}
