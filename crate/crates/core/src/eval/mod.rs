//! Confusion matrices and macro-averaged accuracy / precision / recall / F1.

mod report;

pub use report::{format_report, mean_std, AggregateReport, FoldSummary, MetricColumn};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("class index {value} out of range for {classes} classes")]
    LabelOutOfRange { value: usize, classes: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("no folds to report")]
    NoFolds,
}

/// Counts indexed `[actual][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// Classes re-indexed so that old class `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n_classes();
        let mut counts = vec![vec![0; n]; n];
        let mut names = vec![String::new(); n];
        for a in 0..n {
            names[perm[a]] = self.class_names.get(a).cloned().unwrap_or_default();
            for p in 0..n {
                counts[perm[a]][perm[p]] = self.counts[a][p];
            }
        }
        Self {
            counts,
            class_names: names,
        }
    }
}

pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut counts = vec![vec![0u64; n_classes]; n_classes];
    for (&p, &a) in predictions.iter().zip(labels) {
        for v in [p, a] {
            if v >= n_classes {
                return Err(EvalError::LabelOutOfRange {
                    value: v,
                    classes: n_classes,
                });
            }
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check(cm: &ConfusionMatrix) -> Result<(), EvalError> {
    if cm.total() == 0 {
        Err(EvalError::EmptyMatrix)
    } else {
        Ok(())
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    check(cm)?;
    let trace: u64 = (0..cm.n_classes()).map(|c| cm.counts[c][c]).sum();
    Ok(trace as f64 / cm.total() as f64)
}

pub fn per_class_precision(cm: &ConfusionMatrix) -> Vec<f64> {
    (0..cm.n_classes())
        .map(|c| ratio(cm.counts[c][c], cm.col_sum(c)))
        .collect()
}

pub fn per_class_recall(cm: &ConfusionMatrix) -> Vec<f64> {
    (0..cm.n_classes())
        .map(|c| ratio(cm.counts[c][c], cm.row_sum(c)))
        .collect()
}

pub fn per_class_f1(cm: &ConfusionMatrix) -> Vec<f64> {
    per_class_precision(cm)
        .into_iter()
        .zip(per_class_recall(cm))
        .map(|(p, r)| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
        .collect()
}

fn macro_mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn precision(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    check(cm)?;
    Ok(macro_mean(&per_class_precision(cm)))
}

pub fn recall(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    check(cm)?;
    Ok(macro_mean(&per_class_recall(cm)))
}

pub fn f1(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    check(cm)?;
    Ok(macro_mean(&per_class_f1(cm)))
}

/// Micro-averaged recall: pooled true positives over pooled actual positives.
pub fn micro_recall(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    check(cm)?;
    let tp: u64 = (0..cm.n_classes()).map(|c| cm.counts[c][c]).sum();
    let actual: u64 = (0..cm.n_classes()).map(|c| cm.row_sum(c)).sum();
    Ok(ratio(tp, actual))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Averaging rule used for precision, recall and F1.
    pub averaging: String,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self, EvalError> {
        let p = per_class_precision(&cm);
        let r = per_class_recall(&cm);
        let f = per_class_f1(&cm);
        let per_class = (0..cm.n_classes())
            .map(|c| ClassMetrics {
                name: cm.class_names.get(c).cloned().unwrap_or_else(|| c.to_string()),
                precision: p[c],
                recall: r[c],
                f1: f[c],
                support: cm.row_sum(c),
            })
            .collect();
        Ok(Self {
            accuracy: accuracy(&cm)?,
            precision: precision(&cm)?,
            recall: recall(&cm)?,
            f1: f1(&cm)?,
            averaging: "macro".into(),
            per_class,
            confusion: cm,
        })
    }

    pub fn evaluate(
        predictions: &[usize],
        labels: &[usize],
        class_names: &[String],
    ) -> Result<Self, EvalError> {
        let mut cm = confusion_matrix(predictions, labels, class_names.len())?;
        cm.class_names = class_names.to_vec();
        Self::from_confusion(cm)
    }

    pub fn metric(&self, col: MetricColumn) -> f64 {
        match col {
            MetricColumn::Accuracy => self.accuracy,
            MetricColumn::Precision => self.precision,
            MetricColumn::Recall => self.recall,
            MetricColumn::F1 => self.f1,
        }
    }
}
