use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::MetricsReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Macro,
    #[default]
    Weighted,
}

impl std::str::FromStr for Averaging {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "macro" => Ok(Averaging::Macro),
            "weighted" => Ok(Averaging::Weighted),
            _ => Err(Error::Param {
                name: "averaging".into(),
                message: format!("expected macro or weighted, got {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub averaging: Averaging,
    /// sorted by accuracy, best first
    pub rows: Vec<ComparisonRow>,
    pub baseline: Option<String>,
    /// relative accuracy gain of the best model over the baseline, in percent,
    /// rounded to 2 decimals
    pub improvement_pct: Option<f64>,
}

/// `(a - b) / b`, as a fraction.
pub fn relative_improvement(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        return if a == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (a - b) / b
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Rank models by accuracy. When `baseline` is absent, the weakest model
/// other than the best one serves as the reference.
pub fn compare(
    reports: &BTreeMap<String, MetricsReport>,
    baseline: Option<&str>,
    averaging: Averaging,
) -> Result<Comparison> {
    if reports.is_empty() {
        return Err(Error::EmptyInput("no reports to compare".into()));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|(name, r)| {
            let a = r.averaged(averaging);
            ComparisonRow {
                model: name.clone(),
                accuracy: r.accuracy,
                precision: a.precision,
                recall: a.recall,
                f1: a.f1,
            }
        })
        .collect();
    // stable sort keeps name order among ties
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));

    let baseline = match baseline {
        Some(b) if !reports.contains_key(b) => {
            return Err(Error::Param {
                name: "baseline".into(),
                message: format!("no report named {b:?}"),
            })
        }
        Some(b) => Some(b.to_string()),
        None if rows.len() > 1 => Some(rows.last().expect("nonempty").model.clone()),
        None => None,
    };
    let improvement_pct = baseline
        .as_ref()
        .filter(|b| rows.len() > 1 || **b != rows[0].model)
        .map(|b| round2(100.0 * relative_improvement(rows[0].accuracy, reports[b].accuracy)));
    Ok(Comparison {
        averaging,
        rows,
        baseline,
        improvement_pct,
    })
}

impl Comparison {
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12}{:>10}{:>11}{:>10}{:>10}\n",
            "model", "accuracy", "precision", "recall", "f1"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<12}{:>10.4}{:>11.4}{:>10.4}{:>10.4}\n",
                r.model, r.accuracy, r.precision, r.recall, r.f1
            ));
        }
        if let (Some(b), Some(pct)) = (&self.baseline, self.improvement_pct) {
            out.push_str(&format!(
                "{} improves accuracy over {} by {:.2}%\n",
                self.rows[0].model, b, pct
            ));
        }
        out
    }
}
