//! Evaluation: confusion-matrix metrics, multi-run aggregation, and one-way
//! ANOVA model comparison with F-distribution p-values.

mod anova;
pub mod report;
mod special;

pub use anova::{anova_oneway, AnovaResult};
pub use special::{f_cdf, incomplete_beta, ln_gamma};

use std::fmt;

#[derive(Debug)]
pub enum EvalError {
    LengthMismatch { preds: usize, truths: usize },
    LabelOutOfRange { label: usize, classes: usize },
    EmptyMatrix,
    EmptyList,
    TooFewGroups(usize),
    TooFewObservations(usize),
    /// Zero within-group variance: the F ratio is undefined.
    DegenerateGroups,
    InvalidDegrees { d1: u64, d2: u64 },
    Io(std::io::Error),
    BadFormat(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LengthMismatch { preds, truths } => {
                write!(f, "{preds} predictions vs {truths} truths")
            }
            Self::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Self::EmptyMatrix => write!(f, "confusion matrix has no observations"),
            Self::EmptyList => write!(f, "empty accuracy list"),
            Self::TooFewGroups(n) => write!(f, "ANOVA needs >= 2 groups, found {n}"),
            Self::TooFewObservations(n) => {
                write!(f, "ANOVA needs >= 2 observations per group, found {n}")
            }
            Self::DegenerateGroups => write!(f, "zero within-group variance"),
            Self::InvalidDegrees { d1, d2 } => {
                write!(f, "invalid F-distribution degrees ({d1}, {d2})")
            }
            Self::Io(e) => write!(f, "I/O error: {e}"),
            Self::BadFormat(msg) => write!(f, "bad report: {msg}"),
        }
    }
}

impl std::error::Error for EvalError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Self::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for EvalError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

/// K x K count matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.count(class, class)
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.classes)
            .map(|t| self.count(t, class))
            .sum::<u64>()
            - self.true_positives(class)
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.classes)
            .map(|p| self.count(class, p))
            .sum::<u64>()
            - self.true_positives(class)
    }

    pub fn true_negatives(&self, class: usize) -> u64 {
        self.total()
            - self.true_positives(class)
            - self.false_positives(class)
            - self.false_negatives(class)
    }
}

/// Tally (truth, prediction) pairs into a K x K matrix.
pub fn confusion(preds: &[usize], truths: &[usize], classes: usize) -> Result<ConfusionMatrix, EvalError> {
    if preds.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            truths: truths.len(),
        });
    }
    let mut counts = vec![0u64; classes * classes];
    for (&p, &t) in preds.iter().zip(truths) {
        if p >= classes || t >= classes {
            return Err(EvalError::LabelOutOfRange {
                label: p.max(t),
                classes,
            });
        }
        counts[t * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Micro accuracy plus per-class and macro-averaged precision/recall/F1.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    // Zero-denominator convention: a class with no predicted (or actual)
    // positives scores 0 rather than NaN.
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy = trace/total; per-class precision TP/(TP+FP), recall
/// TP/(TP+FN), F1 = 2TP/(2TP+FP+FN); macro = unweighted class mean.
pub fn metrics(cm: &ConfusionMatrix) -> Result<MetricsReport, EvalError> {
    let total = cm.total();
    if total == 0 || cm.classes() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let correct: u64 = (0..cm.classes()).map(|k| cm.true_positives(k)).sum();
    let mut per_class = Vec::with_capacity(cm.classes());
    for k in 0..cm.classes() {
        let tp = cm.true_positives(k);
        let fp = cm.false_positives(k);
        let fn_ = cm.false_negatives(k);
        per_class.push(ClassMetrics {
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
        });
    }
    let k = cm.classes() as f64;
    Ok(MetricsReport {
        accuracy: correct as f64 / total as f64,
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / k,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / k,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / k,
        per_class,
    })
}

/// Mean (Kahan-summed), maximum, and minimum of per-run accuracies.
pub fn aggregate_runs(accuracies: &[f64]) -> Result<(f64, f64, f64), EvalError> {
    if accuracies.is_empty() {
        return Err(EvalError::EmptyList);
    }
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &a in accuracies {
        let y = a - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        max = max.max(a);
        min = min.min(a);
    }
    Ok((sum / accuracies.len() as f64, max, min))
}
