//! Evaluation metrics: confusion matrix, per-class rates, Cohen's kappa,
//! ROC/AUC, and Wilson confidence intervals.

mod ci;
mod confusion;
mod roc;

pub use ci::error_ci;
pub use confusion::{class_report, cohens_kappa, ClassMetrics, ClassReport, ConfusionMatrix};
pub use roc::{multiclass_auc, roc_curve, MulticlassAuc, RocCurve, RocPoint};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("labels and predictions have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("ROC needs both classes present in the labels")]
    SingleClass,
    #[error("no samples")]
    Empty,
    #[error("unsupported confidence level {0}; use 0.90, 0.95, or 0.99")]
    UnsupportedLevel(f64),
    #[error("confusion matrix must be at least 2x2")]
    TooFewClasses,
}
