use serde::{Deserialize, Serialize};

use super::{EvalError, MetricsReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricColumn {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl MetricColumn {
    /// Table column order.
    pub const ALL: [MetricColumn; 4] = [
        MetricColumn::Accuracy,
        MetricColumn::Precision,
        MetricColumn::Recall,
        MetricColumn::F1,
    ];

    pub fn header(self) -> &'static str {
        match self {
            MetricColumn::Accuracy => "Accuracy",
            MetricColumn::Precision => "Precision",
            MetricColumn::Recall => "Recall",
            MetricColumn::F1 => "F1-score",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            MetricColumn::Accuracy => "accuracy",
            MetricColumn::Precision => "precision",
            MetricColumn::Recall => "recall",
            MetricColumn::F1 => "f1",
        }
    }
}

/// Mean and sample standard deviation (`k - 1` denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Metrics JSON: `{method, feature, dataset, averaging, folds[], mean{}, std{}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub method: String,
    pub feature: String,
    pub dataset: String,
    pub averaging: String,
    pub folds: Vec<FoldSummary>,
    pub mean: std::collections::BTreeMap<String, f64>,
    pub std: std::collections::BTreeMap<String, f64>,
}

impl AggregateReport {
    pub fn new(
        method: &str,
        feature: &str,
        dataset: &str,
        reports: &[MetricsReport],
    ) -> Result<Self, EvalError> {
        if reports.is_empty() {
            return Err(EvalError::NoFolds);
        }
        let folds = reports
            .iter()
            .enumerate()
            .map(|(i, r)| FoldSummary {
                fold: i,
                accuracy: r.accuracy,
                precision: r.precision,
                recall: r.recall,
                f1: r.f1,
            })
            .collect();
        let mut mean = std::collections::BTreeMap::new();
        let mut std = std::collections::BTreeMap::new();
        for col in MetricColumn::ALL {
            let vals: Vec<f64> = reports.iter().map(|r| r.metric(col)).collect();
            let (m, s) = mean_std(&vals);
            mean.insert(col.key().to_string(), m);
            std.insert(col.key().to_string(), s);
        }
        Ok(Self {
            method: method.into(),
            feature: feature.into(),
            dataset: dataset.into(),
            averaging: reports[0].averaging.clone(),
            folds,
            mean,
            std,
        })
    }

    pub fn cell(&self, col: MetricColumn) -> String {
        format!("{:.4}±{:.4}", self.mean[col.key()], self.std[col.key()])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Renders rows of `mean±std` cells as (CSV, JSON).
pub fn format_report(rows: &[AggregateReport]) -> (String, String) {
    let mut csv = String::from("Method,Feature,Dataset");
    for col in MetricColumn::ALL {
        csv.push(',');
        csv.push_str(col.header());
    }
    csv.push('\n');
    for r in rows {
        csv.push_str(&format!("{},{},{}", r.method, r.feature, r.dataset));
        for col in MetricColumn::ALL {
            csv.push(',');
            csv.push_str(&r.cell(col));
        }
        csv.push('\n');
    }
    let json = serde_json::to_string_pretty(rows).expect("report serializes");
    (csv, json)
}
