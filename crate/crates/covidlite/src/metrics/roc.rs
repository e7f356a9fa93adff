//! ROC curves and area under them.

use super::MetricsError;

/// One operating point. The first point is (0, 0) at threshold +inf; the
/// last is always (1, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// `threshold,fpr,tpr` rows with `#` comment lines on top.
    pub fn to_csv(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for line in comments {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("threshold,fpr,tpr\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
        }
        out
    }
}

/// Threshold sweep over every distinct score (predict positive at
/// `score >= threshold`), TPR/FPR per point, AUC by the trapezoidal rule.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("finite scores"));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        // Consume the whole tie group at this threshold.
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }

    let mut auc = 0.0;
    for pair in points.windows(2) {
        auc += (pair[1].fpr - pair[0].fpr) * (pair[0].tpr + pair[1].tpr) / 2.0;
    }
    Ok(RocCurve { points, auc })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassAuc {
    pub per_class: Vec<f64>,
    pub macro_avg: f64,
}

/// One-vs-rest AUC per class (row c of `scores` holding the per-class
/// probabilities of sample c), macro-averaged.
pub fn multiclass_auc(
    scores: &[Vec<f32>],
    labels: &[usize],
    k: usize,
) -> Result<MulticlassAuc, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    let mut per_class = Vec::with_capacity(k);
    for c in 0..k {
        let class_scores: Vec<f64> = scores.iter().map(|row| f64::from(row[c])).collect();
        let class_labels: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        per_class.push(roc_curve(&class_scores, &class_labels)?.auc);
    }
    let macro_avg = per_class.iter().sum::<f64>() / k as f64;
    Ok(MulticlassAuc {
        per_class,
        macro_avg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mann-Whitney pair counting: P(score_pos > score_neg) + 0.5 ties.
    fn pair_count_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let pos: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l)
            .map(|(&s, _)| s)
            .collect();
        let neg: Vec<f64> = scores
            .iter()
            .zip(labels)
            .filter(|(_, &l)| !l)
            .map(|(&s, _)| s)
            .collect();
        let mut total = 0.0;
        for &p in &pos {
            for &n in &neg {
                total += if p > n {
                    1.0
                } else if p == n {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    #[test]
    fn perfect_separation_has_auc_one() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        let roc = roc_curve(&scores, &labels).unwrap();
        assert_eq!(roc.auc, 1.0);
    }

    #[test]
    fn identical_scores_are_chance() {
        let scores = [0.5; 6];
        let labels = [true, false, true, false, true, false];
        let roc = roc_curve(&scores, &labels).unwrap();
        assert!((roc.auc - 0.5).abs() < 1e-12);
    }

    #[test]
    fn six_sample_case_with_one_inversion() {
        let scores = [0.9, 0.8, 0.6, 0.55, 0.3, 0.1];
        let labels = [true, true, false, true, false, false];
        let roc = roc_curve(&scores, &labels).unwrap();
        // Pair counting: 8 of 9 pairs ordered correctly.
        let expect = pair_count_auc(&scores, &labels);
        assert!((expect - 8.0 / 9.0).abs() < 1e-12);
        assert!((roc.auc - expect).abs() < 1e-9);
    }

    #[test]
    fn endpoints_are_exact() {
        let scores = [0.7, 0.4, 0.6, 0.2, 0.9];
        let labels = [true, false, true, false, true];
        let roc = roc_curve(&scores, &labels).unwrap();
        let first = roc.points.first().unwrap();
        let last = roc.points.last().unwrap();
        assert_eq!((first.fpr, first.tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        // FPR never decreases along the sweep.
        for pair in roc.points.windows(2) {
            assert!(pair[1].fpr >= pair[0].fpr);
            assert!(pair[1].tpr >= pair[0].tpr);
        }
    }

    #[test]
    fn auc_is_invariant_under_monotone_transforms() {
        let scores = [0.05, 0.9, 0.3, 0.7, 0.5, 0.2, 0.8];
        let labels = [false, true, false, true, true, false, true];
        let base = roc_curve(&scores, &labels).unwrap().auc;
        let squashed: Vec<f64> = scores.iter().map(|s| (4.0 * s).tanh()).collect();
        let shifted: Vec<f64> = scores.iter().map(|s| 100.0 * s + 3.0).collect();
        assert!((roc_curve(&squashed, &labels).unwrap().auc - base).abs() < 1e-12);
        assert!((roc_curve(&shifted, &labels).unwrap().auc - base).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_matches_pair_counting_on_random_ties() {
        use rand::Rng;
        use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for _ in 0..20 {
            // Quantized scores force plenty of ties.
            let scores: Vec<f64> = (0..40).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
            let labels: Vec<bool> = (0..40).map(|_| rng.random()).collect();
            if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
                continue;
            }
            let roc = roc_curve(&scores, &labels).unwrap();
            assert!((roc.auc - pair_count_auc(&scores, &labels)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_class_labels_error() {
        assert!(matches!(
            roc_curve(&[0.1, 0.9], &[true, true]),
            Err(MetricsError::SingleClass)
        ));
    }

    #[test]
    fn multiclass_perfect_and_uniform() {
        let scores = vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
            vec![0.7, 0.2, 0.1],
            vec![0.2, 0.7, 0.1],
            vec![0.1, 0.2, 0.7],
        ];
        let labels = vec![0, 1, 2, 0, 1, 2];
        let auc = multiclass_auc(&scores, &labels, 3).unwrap();
        assert_eq!(auc.per_class, vec![1.0, 1.0, 1.0]);
        assert_eq!(auc.macro_avg, 1.0);

        let uniform = vec![vec![1.0 / 3.0; 3]; 6];
        let auc = multiclass_auc(&uniform, &labels, 3).unwrap();
        for a in &auc.per_class {
            assert!((a - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn multiclass_matches_pair_count_per_class() {
        use rand::Rng;
        use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let labels: Vec<usize> = (0..30).map(|_| rng.random_range(0..3)).collect();
        let scores: Vec<Vec<f32>> = labels
            .iter()
            .map(|&l| {
                let mut row = vec![rng.random_range(0.0f32..1.0); 3];
                row[l] += rng.random_range(0.0f32..0.5);
                row
            })
            .collect();
        let auc = multiclass_auc(&scores, &labels, 3).unwrap();
        for c in 0..3 {
            let class_scores: Vec<f64> = scores.iter().map(|r| f64::from(r[c])).collect();
            let class_labels: Vec<bool> = labels.iter().map(|&l| l == c).collect();
            let expect = pair_count_auc(&class_scores, &class_labels);
            assert!((auc.per_class[c] - expect).abs() < 1e-9);
        }
    }
}
