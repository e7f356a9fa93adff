//! Confusion matrix and the scalar metrics derived from it.

use serde::Serialize;

use super::ci::error_ci;
use super::MetricsError;

/// K x K counts, rows indexed by true class, columns by prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneVsRest {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    /// Tallies label/prediction pairs.
    pub fn from_predictions(
        labels: &[usize],
        predictions: &[usize],
        k: usize,
    ) -> Result<Self, MetricsError> {
        if labels.len() != predictions.len() {
            return Err(MetricsError::LengthMismatch(labels.len(), predictions.len()));
        }
        if k < 2 {
            return Err(MetricsError::TooFewClasses);
        }
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in labels.iter().zip(predictions) {
            for &v in [t, p].iter() {
                if v >= k {
                    return Err(MetricsError::LabelOutOfRange { label: v, classes: k });
                }
            }
            counts[t * k + p] += 1;
        }
        Ok(Self { k, counts })
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self, MetricsError> {
        if k < 2 {
            return Err(MetricsError::TooFewClasses);
        }
        assert_eq!(counts.len(), k * k, "expected {k}x{k} counts");
        Ok(Self { k, counts })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|i| self.count(i, i)).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|j| self.count(c, j)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|i| self.count(i, c)).sum()
    }

    pub fn one_vs_rest(&self, c: usize) -> OneVsRest {
        let tp = self.count(c, c);
        let fp = self.col_sum(c) - tp;
        let fn_ = self.row_sum(c) - tp;
        let tn = self.total() - tp - fp - fn_;
        OneVsRest { tp, fp, fn_, tn }
    }

    /// trace / total, exactly.
    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }
}

impl std::fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "rows = true class, columns = predicted")?;
        for t in 0..self.k {
            for p in 0..self.k {
                write!(f, "{:>8}", self.count(t, p))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Per-class one-vs-rest rates. A 0/0 rate is reported as 0 with the
/// `undefined_rates` flag set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Number of samples whose true class this is.
    pub support: u64,
    /// Wilson 95% interval on the class error (missed members / support).
    pub error_ci: (f64, f64),
    pub undefined_rates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub kappa: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
}

fn rate(num: u64, den: u64, undefined: &mut bool) -> f64 {
    if den == 0 {
        *undefined = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class one-vs-rest rates plus the global summary metrics.
pub fn class_report(cm: &ConfusionMatrix) -> ClassReport {
    let mut per_class = Vec::with_capacity(cm.k());
    for c in 0..cm.k() {
        let OneVsRest { tp, fp, fn_, tn } = cm.one_vs_rest(c);
        let mut undefined = false;
        let precision = rate(tp, tp + fp, &mut undefined);
        let sensitivity = rate(tp, tp + fn_, &mut undefined);
        let specificity = rate(tn, tn + fp, &mut undefined);
        let f1 = if precision + sensitivity == 0.0 {
            undefined = true;
            0.0
        } else {
            2.0 * precision * sensitivity / (precision + sensitivity)
        };
        let support = tp + fn_;
        let error_ci = if support == 0 {
            undefined = true;
            (0.0, 0.0)
        } else {
            error_ci(fn_, support, 0.95).expect("0.95 is supported")
        };
        per_class.push(ClassMetrics {
            precision,
            sensitivity,
            specificity,
            f1,
            support,
            error_ci,
            undefined_rates: undefined,
        });
    }
    let total = cm.total() as f64;
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / cm.k() as f64;
    let weighted_f1 = per_class
        .iter()
        .map(|m| m.f1 * m.support as f64)
        .sum::<f64>()
        / total;
    ClassReport {
        per_class,
        accuracy: cm.accuracy(),
        kappa: cohens_kappa(cm),
        macro_f1,
        weighted_f1,
    }
}

/// Chance-corrected agreement `(p_o - p_e) / (1 - p_e)`, with
/// `p_e = sum_k row_k * col_k / total^2`. When `p_e` is 1 the statistic is
/// defined as 1 for perfect agreement and 0 otherwise.
pub fn cohens_kappa(cm: &ConfusionMatrix) -> f64 {
    let total = cm.total() as f64;
    let p_o = cm.trace() as f64 / total;
    let p_e = (0..cm.k())
        .map(|c| cm.row_sum(c) as f64 * cm.col_sum(c) as f64)
        .sum::<f64>()
        / (total * total);
    if (1.0 - p_e).abs() < f64::EPSILON {
        return if (p_o - 1.0).abs() < f64::EPSILON { 1.0 } else { 0.0 };
    }
    (p_o - p_e) / (1.0 - p_e)
}

impl std::fmt::Display for ClassReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "{:<7} {:>10} {:>12} {:>12} {:>8} {:>8} {:>22}",
            "class", "precision", "sensitivity", "specificity", "f1", "support", "error (95% CI)"
        )?;
        for (c, m) in self.per_class.iter().enumerate() {
            writeln!(
                f,
                "{:<7} {:>10.4} {:>12.4} {:>12.4} {:>8.4} {:>8} ({:.5}, {:.5}){}",
                c,
                m.precision,
                m.sensitivity,
                m.specificity,
                m.f1,
                m.support,
                m.error_ci.0,
                m.error_ci.1,
                if m.undefined_rates { " *" } else { "" }
            )?;
        }
        writeln!(f, "accuracy:    {:.4}", self.accuracy)?;
        writeln!(f, "kappa:       {:.4}", self.kappa)?;
        writeln!(f, "macro F1:    {:.4}", self.macro_f1)?;
        write!(f, "weighted F1: {:.4}", self.weighted_f1)
    }
}
