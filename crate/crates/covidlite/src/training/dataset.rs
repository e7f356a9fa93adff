//! Labelled file lists, manifests, and deterministic splits.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;

use super::TrainError;
use crate::rng::{stream_rng, Stream};

/// One labelled sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetEntry {
    pub path: PathBuf,
    pub label: usize,
}

/// A labelled file list with stable class naming. Splits and folds are pure
/// functions of (index, seed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetIndex {
    entries: Vec<DatasetEntry>,
    class_names: Vec<String>,
    /// Seed of the shuffle that produced this index, if any.
    seed: Option<u64>,
}

impl DatasetIndex {
    /// Validates labels against the class list and rejects duplicate paths.
    pub fn new(entries: Vec<DatasetEntry>, class_names: Vec<String>) -> Result<Self, TrainError> {
        let k = class_names.len();
        if k < 1 {
            return Err(TrainError::Index("no classes".into()));
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if e.label >= k {
                return Err(TrainError::Index(format!(
                    "label {} out of range for {k} classes ({})",
                    e.label,
                    e.path.display()
                )));
            }
            if !seen.insert(e.path.clone()) {
                return Err(TrainError::Index(format!(
                    "duplicate path {}",
                    e.path.display()
                )));
            }
        }
        Ok(Self {
            entries,
            class_names,
            seed: None,
        })
    }

    pub fn entries(&self) -> &[DatasetEntry] {
        &self.entries
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn per_class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for e in &self.entries {
            counts[e.label] += 1;
        }
        counts
    }

    fn with_entries(&self, entries: Vec<DatasetEntry>, seed: u64) -> Self {
        Self {
            entries,
            class_names: self.class_names.clone(),
            seed: Some(seed),
        }
    }
}

/// Splits per class: shuffle with the seed, round(ratio * n) samples train,
/// the rest test. Errors if any class would leave either side empty.
pub fn stratified_split(
    index: &DatasetIndex,
    ratio: f64,
    seed: u64,
) -> Result<(DatasetIndex, DatasetIndex), TrainError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(TrainError::Config(
            "split ratio must lie strictly between 0 and 1".into(),
        ));
    }
    let mut rng = stream_rng(seed, Stream::Split);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (label, name) in index.class_names().iter().enumerate() {
        let mut class: Vec<&DatasetEntry> =
            index.entries().iter().filter(|e| e.label == label).collect();
        if class.is_empty() {
            continue;
        }
        class.shuffle(&mut rng);
        let n_train = (ratio * class.len() as f64).round() as usize;
        if n_train == 0 || n_train == class.len() {
            return Err(TrainError::DegenerateSplit { name: name.clone() });
        }
        for (i, e) in class.into_iter().enumerate() {
            if i < n_train {
                train.push(e.clone());
            } else {
                test.push(e.clone());
            }
        }
    }
    Ok((
        index.with_entries(train, seed),
        index.with_entries(test, seed),
    ))
}

/// Stratified k-fold partition: per class, shuffled samples are dealt into k
/// chunks whose sizes differ by at most one; fold i validates chunk i and
/// fits on the rest. Every sample validates exactly once.
pub fn kfold_partition(
    index: &DatasetIndex,
    k: usize,
    seed: u64,
) -> Result<Vec<(DatasetIndex, DatasetIndex)>, TrainError> {
    if k < 2 {
        return Err(TrainError::Config("k_folds must be >= 2".into()));
    }
    let mut rng = stream_rng(seed, Stream::Fold);
    // Chunk boundaries per class, computed once so all folds agree. The
    // remainder chunks rotate across folds so total fold sizes stay balanced
    // even when several classes have n % k != 0.
    let mut class_chunks: Vec<Vec<Vec<DatasetEntry>>> = Vec::new();
    let mut extra_offset = 0;
    for label in 0..index.num_classes() {
        let mut class: Vec<&DatasetEntry> =
            index.entries().iter().filter(|e| e.label == label).collect();
        class.shuffle(&mut rng);
        let n = class.len();
        let base = n / k;
        let extra = n % k;
        let mut sizes = vec![base; k];
        for j in 0..extra {
            sizes[(extra_offset + j) % k] += 1;
        }
        extra_offset = (extra_offset + extra) % k;
        let mut chunks = Vec::with_capacity(k);
        let mut cursor = 0;
        for &size in &sizes {
            chunks.push(class[cursor..cursor + size].iter().map(|e| (*e).clone()).collect());
            cursor += size;
        }
        class_chunks.push(chunks);
    }

    let mut folds = Vec::with_capacity(k);
    for f in 0..k {
        let mut fit_part = Vec::new();
        let mut val_part = Vec::new();
        for chunks in &class_chunks {
            for (i, chunk) in chunks.iter().enumerate() {
                if i == f {
                    val_part.extend(chunk.iter().cloned());
                } else {
                    fit_part.extend(chunk.iter().cloned());
                }
            }
        }
        if val_part.is_empty() || fit_part.is_empty() {
            return Err(TrainError::Config(format!(
                "fold {f} is empty; fewer samples than folds"
            )));
        }
        folds.push((
            index.with_entries(fit_part, seed),
            index.with_entries(val_part, seed),
        ));
    }
    Ok(folds)
}

/// Writes `path,label,class_name` rows, preceded by `#`-prefixed comment
/// lines recording how the manifest was produced.
pub fn write_manifest(
    index: &DatasetIndex,
    path: &Path,
    comments: &[String],
) -> Result<(), TrainError> {
    let io_err = |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut raw = String::new();
    for line in comments {
        raw.push_str("# ");
        raw.push_str(line);
        raw.push('\n');
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["path", "label", "class_name"])
        .expect("in-memory write");
    for e in index.entries() {
        writer
            .write_record([
                e.path.display().to_string(),
                e.label.to_string(),
                index.class_names()[e.label].clone(),
            ])
            .expect("in-memory write");
    }
    let body = writer.into_inner().expect("in-memory flush");
    raw.push_str(std::str::from_utf8(&body).expect("csv is utf-8"));
    std::fs::write(path, raw).map_err(io_err)
}

/// Reads a manifest written by [`write_manifest`].
pub fn read_manifest(path: &Path) -> Result<DatasetIndex, TrainError> {
    let parse_err = |message: String| TrainError::Manifest {
        path: path.display().to_string(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let mut entries = Vec::new();
    let mut names: Vec<Option<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_err(format!("expected 3 columns, got {}", record.len())));
        }
        let label: usize = record[1]
            .parse()
            .map_err(|_| parse_err(format!("bad label {:?}", &record[1])))?;
        if names.len() <= label {
            names.resize(label + 1, None);
        }
        match &names[label] {
            None => names[label] = Some(record[2].to_string()),
            Some(existing) if existing != &record[2] => {
                return Err(parse_err(format!(
                    "label {label} maps to both {existing:?} and {:?}",
                    &record[2]
                )));
            }
            _ => {}
        }
        entries.push(DatasetEntry {
            path: PathBuf::from(&record[0]),
            label,
        });
    }
    let class_names: Vec<String> = names
        .into_iter()
        .enumerate()
        .map(|(i, n)| n.ok_or_else(|| parse_err(format!("no rows for label {i}"))))
        .collect::<Result<_, _>>()?;
    DatasetIndex::new(entries, class_names)
}
