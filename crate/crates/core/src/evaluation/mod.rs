//! Metrics, label aggregation and the experiment drivers built on them.

mod cv;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelError;

pub use cv::{cross_validate_rows, fold_assignments, heldout_eval, kfold_cv, CvResult, FoldResult, Prediction};
pub use report::{evaluate_external, parse_external_scores, write_confusion_csv, ExternalScore};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("label {0} is not one of the report classes")]
    UnknownLabel(u8),
    #[error("band {0} outside 1..=7")]
    BadLabel(u8),
    #[error("document {0} has no IC label")]
    MissingLabel(String),
    #[error("{n} examples cannot fill {k} folds")]
    TooFewExamples { n: usize, k: usize },
    #[error("line {line}: {msg}")]
    ExternalScores { line: usize, msg: String },
    #[error("no external score for document {0}")]
    MissingPrediction(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_lengths(y_true: &[u8], y_pred: &[u8]) -> Result<(), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Sorted union of the labels in both vectors.
fn observed_classes(y_true: &[u8], y_pred: &[u8]) -> Vec<u8> {
    let mut classes: Vec<u8> = y_true.iter().chain(y_pred).copied().collect();
    classes.sort_unstable();
    classes.dedup();
    classes
}

/// Support-weighted F1 over the classes present in either vector. A class
/// with no predictions (or no true members) gets F1 = 0.
pub fn weighted_f1(y_true: &[u8], y_pred: &[u8]) -> Result<f64, EvalError> {
    check_lengths(y_true, y_pred)?;
    let classes = observed_classes(y_true, y_pred);
    let per_class = class_metrics(y_true, y_pred, &classes)?;
    Ok(weighted(&per_class).2)
}

pub fn mse(y_true: &[u8], y_pred: &[u8]) -> Result<f64, EvalError> {
    check_lengths(y_true, y_pred)?;
    let sum: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(&t, &p)| (t as f64 - p as f64).powi(2))
        .sum();
    Ok(sum / y_true.len() as f64)
}

/// `matrix[i][j]` counts examples of true class `classes[i]` predicted as
/// `classes[j]`.
pub fn confusion_matrix(y_true: &[u8], y_pred: &[u8], classes: &[u8]) -> Result<Vec<Vec<usize>>, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let pos = |l: u8| classes.iter().position(|&c| c == l).ok_or(EvalError::UnknownLabel(l));
    let mut m = vec![vec![0usize; classes.len()]; classes.len()];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        m[pos(t)?][pos(p)?] += 1;
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u8,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn class_metrics(y_true: &[u8], y_pred: &[u8], classes: &[u8]) -> Result<Vec<ClassMetrics>, EvalError> {
    let m = confusion_matrix(y_true, y_pred, classes)?;
    Ok(metrics_from_confusion(&m, classes))
}

fn metrics_from_confusion(m: &[Vec<usize>], classes: &[u8]) -> Vec<ClassMetrics> {
    (0..classes.len())
        .map(|i| {
            let tp = m[i][i];
            let support: usize = m[i].iter().sum();
            let predicted: usize = m.iter().map(|row| row[i]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                class: classes[i],
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect()
}

/// Support-weighted precision, recall and F1.
fn weighted(per_class: &[ClassMetrics]) -> (f64, f64, f64) {
    let total: usize = per_class.iter().map(|c| c.support).sum();
    if total == 0 {
        return (0.0, 0.0, 0.0);
    }
    let w = |f: fn(&ClassMetrics) -> f64| {
        per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
    };
    (w(|c| c.precision), w(|c| c.recall), w(|c| c.f1))
}

/// How the seven IC bands are grouped before scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationScheme {
    #[default]
    Seven,
    /// {1}, {2,3}, {4,5}, {6,7}
    Four,
    /// {1}, {2..5}, {6,7}
    Three,
}

impl AggregationScheme {
    pub fn map(self, band: u8) -> Result<u8, EvalError> {
        if !(1..=7).contains(&band) {
            return Err(EvalError::BadLabel(band));
        }
        Ok(match self {
            AggregationScheme::Seven => band,
            AggregationScheme::Four => [1, 2, 2, 3, 3, 4, 4][band as usize - 1],
            AggregationScheme::Three => [1, 2, 2, 2, 2, 3, 3][band as usize - 1],
        })
    }

    pub fn groups(self) -> Vec<u8> {
        let n = match self {
            AggregationScheme::Seven => 7,
            AggregationScheme::Four => 4,
            AggregationScheme::Three => 3,
        };
        (1..=n).collect()
    }

    /// Human label for a group, listing the bands it merges.
    pub fn group_label(self, group: u8) -> String {
        let bands: Vec<String> = (1..=7u8)
            .filter(|&b| self.map(b).ok() == Some(group))
            .map(|b| b.to_string())
            .collect();
        bands.join("+")
    }

    pub fn aggregate(self, bands: &[u8]) -> Result<Vec<u8>, EvalError> {
        bands.iter().map(|&b| self.map(b)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            AggregationScheme::Seven => "seven",
            AggregationScheme::Four => "four",
            AggregationScheme::Three => "three",
        }
    }
}

impl fmt::Display for AggregationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AggregationScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "seven" | "7" => Ok(AggregationScheme::Seven),
            "four" | "4" => Ok(AggregationScheme::Four),
            "three" | "3" => Ok(AggregationScheme::Three),
            _ => Err(format!("unknown aggregation scheme {s:?}; expected seven, four or three")),
        }
    }
}

/// Reference comparisons this toolkit does not provide.
pub const UNAVAILABLE_COMPARISONS: [&str; 1] = ["linear SVM baseline (not implemented)"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub scheme: AggregationScheme,
    pub classes: Vec<u8>,
    pub per_class: Vec<ClassMetrics>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub mse: f64,
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
    pub notes: Vec<String>,
}

impl EvalReport {
    /// Scores predictions already expressed in the groups of `scheme`.
    pub fn compute(model: &str, scheme: AggregationScheme, y_true: &[u8], y_pred: &[u8]) -> Result<EvalReport, EvalError> {
        Self::with_classes(model, scheme, &scheme.groups(), y_true, y_pred)
    }

    pub fn with_classes(
        model: &str,
        scheme: AggregationScheme,
        classes: &[u8],
        y_true: &[u8],
        y_pred: &[u8],
    ) -> Result<EvalReport, EvalError> {
        check_lengths(y_true, y_pred)?;
        let confusion = confusion_matrix(y_true, y_pred, classes)?;
        Ok(Self::from_confusion(model, scheme, classes, confusion, mse(y_true, y_pred)?))
    }

    pub(crate) fn from_confusion(
        model: &str,
        scheme: AggregationScheme,
        classes: &[u8],
        confusion: Vec<Vec<usize>>,
        mse: f64,
    ) -> EvalReport {
        let per_class = metrics_from_confusion(&confusion, classes);
        let (weighted_precision, weighted_recall, weighted_f1) = weighted(&per_class);
        EvalReport {
            model: model.to_string(),
            scheme,
            classes: classes.to_vec(),
            n: confusion.iter().flatten().sum(),
            per_class,
            weighted_precision,
            weighted_recall,
            weighted_f1,
            mse,
            confusion,
            notes: UNAVAILABLE_COMPARISONS.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Per-class precision/recall/F1/support with a support-weighted
    /// average row, followed by the MSE.
    pub fn render_table(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "model: {}  scheme: {}  n = {}", self.model, self.scheme, self.n);
        let _ = writeln!(out, "{:<9} {:>9} {:>9} {:>9} {:>9}", "IC", "Support", "Precision", "Recall", "F1");
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:<9} {:>9} {:>9.3} {:>9.3} {:>9.3}",
                self.scheme.group_label(c.class),
                c.support,
                c.precision,
                c.recall,
                c.f1
            );
        }
        let _ = writeln!(
            out,
            "{:<9} {:>9} {:>9.3} {:>9.3} {:>9.3}",
            "Average", self.n, self.weighted_precision, self.weighted_recall, self.weighted_f1
        );
        let _ = writeln!(out, "MSE {:.3}", self.mse);
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}
