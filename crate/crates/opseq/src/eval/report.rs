//! JSON report schema. Field order is fixed by the struct declarations so
//! serialized reports diff cleanly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnovaResult, ConfusionMatrix, EvalError, MetricsReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunsReport {
    pub mean: f64,
    pub max: f64,
    pub min: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaReport {
    #[serde(rename = "F")]
    pub f: f64,
    pub df1: u64,
    pub df2: u64,
    pub p: f64,
}

impl From<&AnovaResult> for AnovaReport {
    fn from(r: &AnovaResult) -> Self {
        Self {
            f: r.f,
            df1: r.df_between,
            df2: r.df_within,
            p: r.p,
        }
    }
}

/// The metrics JSON emitted by `eval`, `pipeline`, and `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassReport>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroReport,
    /// Row-major K x K counts, rows = true class.
    pub confusion: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runs: Option<RunsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anova: Option<AnovaReport>,
}

impl EvalReport {
    pub fn new(cm: &ConfusionMatrix, report: &MetricsReport, labels: &[String]) -> Self {
        let per_class = report
            .per_class
            .iter()
            .enumerate()
            .map(|(i, m)| ClassReport {
                label: labels
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| i.to_string()),
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            })
            .collect();
        Self {
            accuracy: report.accuracy,
            per_class,
            macro_avg: MacroReport {
                precision: report.macro_precision,
                recall: report.macro_recall,
                f1: report.macro_f1,
            },
            confusion: cm.counts().to_vec(),
            runs: None,
            anova: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), EvalError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| EvalError::BadFormat(format!("report serialization failed: {e}")))?;
        fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, EvalError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| EvalError::BadFormat(format!("report parse failed: {e}")))
    }
}
