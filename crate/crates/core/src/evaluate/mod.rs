//! Classification metrics, confusion matrices and model comparison tables.

mod compare;
mod render;

pub use compare::{compare, relative_improvement, Averaging, Comparison, ComparisonRow};
pub use render::{confusion_csv, confusion_svg, write_report_artifacts, ReportArtifacts};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Label, Result};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub per_class: BTreeMap<Label, ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: AveragedMetrics,
    pub weighted_avg: AveragedMetrics,
    /// rows are true labels, columns predictions, both in label-code order
    pub confusion: [[usize; Label::COUNT]; Label::COUNT],
    pub n_samples: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn evaluate(y_true: &[Label], y_pred: &[Label]) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput("no predictions to evaluate".into()));
    }
    let mut confusion = [[0usize; Label::COUNT]; Label::COUNT];
    for (t, p) in y_true.iter().zip(y_pred) {
        confusion[t.code()][p.code()] += 1;
    }
    let n = y_true.len();
    let mut per_class = BTreeMap::new();
    let (mut macro_avg, mut weighted_avg) = (AveragedMetrics::default(), AveragedMetrics::default());
    let mut correct = 0;
    for label in Label::ALL {
        let c = label.code();
        let tp = confusion[c][c];
        correct += tp;
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = (0..Label::COUNT).map(|r| confusion[r][c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = harmonic(precision, recall);
        let w = support as f64 / n as f64;
        macro_avg.precision += precision / Label::COUNT as f64;
        macro_avg.recall += recall / Label::COUNT as f64;
        macro_avg.f1 += f1 / Label::COUNT as f64;
        weighted_avg.precision += w * precision;
        weighted_avg.recall += w * recall;
        weighted_avg.f1 += w * f1;
        per_class.insert(label, ClassMetrics { precision, recall, f1, support });
    }
    let accuracy = correct as f64 / n as f64;
    debug_assert!((weighted_avg.recall - accuracy).abs() < 1e-9);
    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        per_class,
        accuracy,
        macro_avg,
        weighted_avg,
        confusion,
        n_samples: n,
    })
}

impl MetricsReport {
    pub fn class(&self, label: Label) -> ClassMetrics {
        self.per_class.get(&label).copied().unwrap_or_default()
    }

    pub fn averaged(&self, averaging: Averaging) -> AveragedMetrics {
        match averaging {
            Averaging::Macro => self.macro_avg,
            Averaging::Weighted => self.weighted_avg,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(src: &str) -> Result<Self> {
        Ok(serde_json::from_str(src)?)
    }

    /// Plain-text table in the usual per-class layout.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<20}{:>10}{:>10}{:>10}{:>10}\n",
            "class", "precision", "recall", "f1", "support"
        );
        for (label, m) in &self.per_class {
            out.push_str(&format!(
                "{:<20}{:>10.4}{:>10.4}{:>10.4}{:>10}\n",
                label.name(),
                m.precision,
                m.recall,
                m.f1,
                m.support
            ));
        }
        for (name, a) in [("macro avg", self.macro_avg), ("weighted avg", self.weighted_avg)] {
            out.push_str(&format!(
                "{:<20}{:>10.4}{:>10.4}{:>10.4}{:>10}\n",
                name, a.precision, a.recall, a.f1, self.n_samples
            ));
        }
        out.push_str(&format!("{:<20}{:>30.4}\n", "accuracy", self.accuracy));
        out
    }
}
