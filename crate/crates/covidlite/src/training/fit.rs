//! Mini-batch training, evaluation, and k-fold cross-validation.

use std::path::Path;

use rand::seq::SliceRandom;

use super::adam::AdamState;
use super::dataset::DatasetIndex;
use super::{TrainConfig, TrainError};
use crate::imaging::{load_image, preprocess, PreprocessConfig};
use crate::model::{build_covidlite, ModelState};
use crate::nncore::{softmax, GradTape, Gradients, Tensor};
use crate::rng::{stream_rng, Stream};

const EVAL_BATCH: usize = 8;

/// One epoch of the training record. `lr` is the learning rate in effect at
/// the epoch's first optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub lr: f64,
}

/// Per-epoch training record plus the count of skipped (unreadable) files.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub skipped_files: usize,
}

impl History {
    /// Writes `epoch,loss,accuracy,lr` rows, preceded by `#` comment lines.
    pub fn write_csv(&self, path: &Path, comments: &[String]) -> Result<(), TrainError> {
        let mut text = String::new();
        for line in comments {
            text.push_str("# ");
            text.push_str(line);
            text.push('\n');
        }
        text.push_str("epoch,loss,accuracy,lr\n");
        for e in &self.epochs {
            text.push_str(&format!(
                "{},{:.6},{:.6},{:.8}\n",
                e.epoch, e.loss, e.accuracy, e.lr
            ));
        }
        std::fs::write(path, text).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Evaluation arrays for the metrics suite: one row of class probabilities
/// per sample, the argmax prediction, and the true label.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub labels: Vec<usize>,
    pub predictions: Vec<usize>,
    pub scores: Vec<Vec<f32>>,
    pub skipped_files: usize,
}

impl EvalOutcome {
    pub fn accuracy(&self) -> f64 {
        if self.labels.is_empty() {
            return 0.0;
        }
        let correct = self
            .labels
            .iter()
            .zip(&self.predictions)
            .filter(|(l, p)| l == p)
            .count();
        correct as f64 / self.labels.len() as f64
    }
}

/// Cross-validation summary: per-fold validation accuracy, mean, and sample
/// standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std_dev: f64,
}

impl std::fmt::Display for CvReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, acc) in self.fold_accuracies.iter().enumerate() {
            writeln!(f, "fold {}: {:.2}%", i + 1, acc * 100.0)?;
        }
        write!(
            f,
            "average: {:.2}% (± {:.2}%)",
            self.mean * 100.0,
            self.std_dev * 100.0
        )
    }
}

/// Decodes and preprocesses every readable file up front (preprocessing is
/// pure, so caching is free determinism-wise). Unreadable files are skipped
/// with a warning and counted.
fn load_preprocessed(
    index: &DatasetIndex,
    cfg: &PreprocessConfig,
    input_size: usize,
) -> Result<(Vec<(Vec<f32>, usize)>, usize), TrainError> {
    cfg.validate()?;
    if cfg.target_size != input_size {
        return Err(TrainError::Config(format!(
            "preprocess target_size {} does not match the model input {input_size}",
            cfg.target_size
        )));
    }
    let mut samples = Vec::with_capacity(index.len());
    let mut skipped = 0;
    for entry in index.entries() {
        match load_image(&entry.path).and_then(|img| preprocess(&img, cfg)) {
            Ok(normalized) => samples.push((normalized.data().to_vec(), entry.label)),
            Err(err) => {
                log::warn!("skipping unreadable image {}: {err}", entry.path.display());
                skipped += 1;
            }
        }
    }
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    Ok((samples, skipped))
}

fn batch_tensor(samples: &[(Vec<f32>, usize)], order: &[usize], size: usize) -> (Tensor, Vec<usize>) {
    let mut data = Vec::with_capacity(order.len() * samples[order[0]].0.len());
    let mut labels = Vec::with_capacity(order.len());
    for &i in order {
        data.extend_from_slice(&samples[i].0);
        labels.push(samples[i].1);
    }
    (
        Tensor::from_vec(&[order.len(), size, size, 3], data),
        labels,
    )
}

/// First maximum wins ties, keeping predictions deterministic.
fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Trains `model` in place: per epoch, a seeded shuffle, mini-batches (the
/// final partial batch is kept), forward, loss, backward, one Adam step.
/// Deterministic for a fixed seed.
pub fn fit(
    model: &mut ModelState,
    index: &DatasetIndex,
    config: &TrainConfig,
    preprocess_cfg: &PreprocessConfig,
) -> Result<History, TrainError> {
    config.validate()?;
    if index.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if index.num_classes() != model.num_classes() || config.num_classes != model.num_classes() {
        return Err(TrainError::ClassCountMismatch {
            data: index.num_classes(),
            model: model.num_classes(),
        });
    }
    let input_size = model.input_size();
    let (samples, skipped_files) = load_preprocessed(index, preprocess_cfg, input_size)?;

    let mut rng = stream_rng(config.seed, Stream::Train);
    let mut adam = AdamState::new(model.network(), config.initial_lr, config.decay());
    let mut grads = Gradients::zeros_for(model.network());
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = History {
        epochs: Vec::with_capacity(config.epochs),
        skipped_files,
    };

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let epoch_lr = adam.next_lr();
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let (batch, labels) = batch_tensor(&samples, chunk, input_size);
            let mut tape = GradTape::new();
            let logits = model.network_mut().forward_train(&batch, &mut rng, &mut tape)?;
            let probs = softmax(&logits);
            let (loss, dlogits) = crate::nncore::sparse_ce_loss(&probs, &labels)?;
            grads.reset();
            model.network().backward(&mut tape, &dlogits, &mut grads, None);
            adam.step(model.network_mut(), &grads)?;

            loss_sum += f64::from(loss) * chunk.len() as f64;
            for (row, &label) in probs.data().chunks_exact(model.num_classes()).zip(&labels) {
                if argmax(row) == label {
                    correct += 1;
                }
            }
        }
        let n = samples.len() as f64;
        let stats = EpochStats {
            epoch,
            loss: loss_sum / n,
            accuracy: correct as f64 / n,
            lr: epoch_lr,
        };
        log::info!(
            "epoch {}/{}: loss {:.4}, accuracy {:.4}, lr {:.6}",
            stats.epoch,
            config.epochs,
            stats.loss,
            stats.accuracy,
            stats.lr
        );
        history.epochs.push(stats);
    }
    Ok(history)
}

/// Inference over a dataset, batched for throughput. The outcome feeds the
/// metrics suite.
pub fn evaluate(
    model: &ModelState,
    index: &DatasetIndex,
    preprocess_cfg: &PreprocessConfig,
) -> Result<EvalOutcome, TrainError> {
    if index.num_classes() != model.num_classes() {
        return Err(TrainError::ClassCountMismatch {
            data: index.num_classes(),
            model: model.num_classes(),
        });
    }
    let input_size = model.input_size();
    let (samples, skipped_files) = load_preprocessed(index, preprocess_cfg, input_size)?;

    let k = model.num_classes();
    let mut outcome = EvalOutcome {
        labels: Vec::with_capacity(samples.len()),
        predictions: Vec::with_capacity(samples.len()),
        scores: Vec::with_capacity(samples.len()),
        skipped_files,
    };
    let order: Vec<usize> = (0..samples.len()).collect();
    for chunk in order.chunks(EVAL_BATCH) {
        let (batch, labels) = batch_tensor(&samples, chunk, input_size);
        let logits = model.logits(&batch)?;
        let probs = softmax(&logits);
        for (row, label) in probs.data().chunks_exact(k).zip(labels) {
            outcome.labels.push(label);
            outcome.predictions.push(argmax(row));
            outcome.scores.push(row.to_vec());
        }
    }
    Ok(outcome)
}

/// Runs `fit` on each of the k folds and reports validation accuracy as
/// mean ± sample standard deviation.
pub fn cross_validate(
    index: &DatasetIndex,
    config: &TrainConfig,
    preprocess_cfg: &PreprocessConfig,
) -> Result<CvReport, TrainError> {
    config.validate()?;
    let folds = super::dataset::kfold_partition(index, config.k_folds, config.seed)?;
    let mut fold_accuracies = Vec::with_capacity(folds.len());
    for (i, (fit_part, val_part)) in folds.iter().enumerate() {
        let mut model = build_covidlite(config.num_classes, config.seed)?;
        fit(&mut model, fit_part, config, preprocess_cfg)?;
        let outcome = evaluate(&model, val_part, preprocess_cfg)?;
        log::info!("fold {}: validation accuracy {:.4}", i + 1, outcome.accuracy());
        fold_accuracies.push(outcome.accuracy());
    }
    let n = fold_accuracies.len() as f64;
    let mean = fold_accuracies.iter().sum::<f64>() / n;
    let variance = fold_accuracies
        .iter()
        .map(|a| (a - mean) * (a - mean))
        .sum::<f64>()
        / (n - 1.0);
    Ok(CvReport {
        fold_accuracies,
        mean,
        std_dev: variance.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{encode_image, Image};
    use crate::training::DatasetEntry;
    use rand::Rng;
    use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};

    /// Writes tiny synthetic PNGs with class-dependent brightness bands.
    fn synthetic_dataset(dir: &Path, per_class: usize, classes: usize) -> DatasetIndex {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut entries = Vec::new();
        for label in 0..classes {
            for i in 0..per_class {
                let mut data = vec![0u8; 32 * 32];
                for (p, v) in data.iter_mut().enumerate() {
                    let y = p / 32;
                    let band = y * classes / 32;
                    let base: u8 = if band == label { 200 } else { 30 };
                    *v = base.saturating_add(rng.random_range(0..30));
                }
                let img = Image::new(32, 32, 1, data).unwrap();
                let path = dir.join(format!("c{label}_{i}.png"));
                encode_image(&img, &path).unwrap();
                entries.push(DatasetEntry { path, label });
            }
        }
        let names = (0..classes).map(|c| format!("class{c}")).collect();
        DatasetIndex::new(entries, names).unwrap()
    }

    fn fast_preprocess() -> PreprocessConfig {
        PreprocessConfig {
            apply_white_balance: false,
            apply_clahe: false,
            ..PreprocessConfig::default()
        }
    }

    #[test]
    fn first_epoch_loss_is_near_uniform_baseline() {
        let dir = tempfile::tempdir().unwrap();
        let index = synthetic_dataset(dir.path(), 2, 3);
        let mut model = build_covidlite(3, 11).unwrap();
        let config = TrainConfig {
            epochs: 1,
            seed: 11,
            ..TrainConfig::default()
        };
        let history = fit(&mut model, &index, &config, &fast_preprocess()).unwrap();
        assert_eq!(history.epochs.len(), 1);
        let ln3 = 3.0f64.ln();
        assert!(
            (history.epochs[0].loss - ln3).abs() < 0.3,
            "epoch-1 loss {} not near ln 3",
            history.epochs[0].loss
        );
        assert_eq!(history.epochs[0].lr, 0.001);
    }

    #[test]
    fn same_seed_gives_identical_histories() {
        let dir = tempfile::tempdir().unwrap();
        let index = synthetic_dataset(dir.path(), 2, 2);
        let config = TrainConfig {
            epochs: 2,
            seed: 21,
            num_classes: 2,
            ..TrainConfig::default()
        };
        let mut m1 = build_covidlite(2, 21).unwrap();
        let h1 = fit(&mut m1, &index, &config, &fast_preprocess()).unwrap();
        let mut m2 = build_covidlite(2, 21).unwrap();
        let h2 = fit(&mut m2, &index, &config, &fast_preprocess()).unwrap();
        assert_eq!(h1, h2);
        for ((_, a), (_, b)) in m1.network().params().iter().zip(m2.network().params().iter()) {
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn unreadable_files_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let index = synthetic_dataset(dir.path(), 2, 2);
        let bogus = dir.path().join("bogus.png");
        std::fs::write(&bogus, b"not an image").unwrap();
        let mut entries = index.entries().to_vec();
        entries.push(DatasetEntry {
            path: bogus,
            label: 0,
        });
        let index = DatasetIndex::new(entries, index.class_names().to_vec()).unwrap();
        let mut model = build_covidlite(2, 3).unwrap();
        let config = TrainConfig {
            epochs: 1,
            seed: 3,
            num_classes: 2,
            ..TrainConfig::default()
        };
        let history = fit(&mut model, &index, &config, &fast_preprocess()).unwrap();
        assert_eq!(history.skipped_files, 1);
    }

    #[test]
    fn class_count_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let index = synthetic_dataset(dir.path(), 2, 3);
        let mut model = build_covidlite(2, 0).unwrap();
        let config = TrainConfig {
            epochs: 1,
            num_classes: 2,
            ..TrainConfig::default()
        };
        assert!(matches!(
            fit(&mut model, &index, &config, &fast_preprocess()),
            Err(TrainError::ClassCountMismatch { data: 3, model: 2 })
        ));
    }

    #[test]
    fn history_csv_embeds_comments() {
        let history = History {
            epochs: vec![EpochStats {
                epoch: 1,
                loss: 1.0986,
                accuracy: 0.33,
                lr: 0.001,
            }],
            skipped_files: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        history.write_csv(&path, &["seed=7".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# seed=7\n"));
        assert!(text.contains("epoch,loss,accuracy,lr"));
        assert!(text.contains("1,1.098600,0.330000,0.00100000"));
    }
}
