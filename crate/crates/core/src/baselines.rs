//! Comparison systems: majority class, single-scalar boosted models over
//! word count or sentiment, and a Bernoulli/Gaussian naive Bayes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbt::{self, argmax, softmax, GbtError, GbtModel, GbtParams};

/// Laplace smoothing for Bernoulli slots.
const NB_ALPHA: f64 = 1.0;
const NB_VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("no labels to train on")]
    EmptyLabels,
    #[error("{values} inputs but {labels} labels")]
    LengthMismatch { values: usize, labels: usize },
    #[error("sentiment score {0} outside [-1, 1]")]
    OutOfRangeSentiment(f64),
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error(transparent)]
    Gbt(#[from] GbtError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    WordCount,
    Sentiment,
}

impl ScalarKind {
    pub fn feature_id(self) -> &'static str {
        match self {
            ScalarKind::WordCount => crate::features::WORD_COUNT,
            ScalarKind::Sentiment => crate::features::SENTIMENT,
        }
    }
}

/// Always predicts the modal training class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorityModel {
    pub class: u8,
    /// Every class seen in training, ascending.
    pub classes: Vec<u8>,
}

impl MajorityModel {
    pub fn predict_proba(&self) -> Vec<f64> {
        self.classes.iter().map(|&c| (c == self.class) as u8 as f64).collect()
    }
}

/// Modal class of `labels`; ties go to the lower class id.
pub fn train_majority(labels: &[u8]) -> Result<MajorityModel, BaselineError> {
    if labels.is_empty() {
        return Err(BaselineError::EmptyLabels);
    }
    let mut counts = [0usize; 256];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let mut class = 0u8;
    for c in 0..=255u8 {
        if counts[c as usize] > counts[class as usize] {
            class = c;
        }
    }
    let classes = (0..=255u8).filter(|&c| counts[c as usize] > 0).collect();
    Ok(MajorityModel { class, classes })
}

/// Fits the boosted ensemble on one scalar input.
pub fn train_single_feature(
    values: &[f64],
    labels: &[u8],
    kind: ScalarKind,
    params: &GbtParams,
    seed: u64,
) -> Result<GbtModel, BaselineError> {
    if values.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            values: values.len(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(BaselineError::EmptyLabels);
    }
    if kind == ScalarKind::Sentiment {
        if let Some(&bad) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(BaselineError::OutOfRangeSentiment(bad));
        }
    }
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let ids = vec![kind.feature_id().to_string()];
    Ok(gbt::train(&rows, labels, &ids, params, seed)?.model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "likelihood", rename_all = "snake_case")]
pub enum NbFeature {
    /// Per-class log P(x=1) and log P(x=0).
    Bernoulli { log_p: Vec<f64>, log_q: Vec<f64> },
    Gaussian { mean: Vec<f64>, var: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub classes: Vec<u8>,
    pub log_priors: Vec<f64>,
    pub features: Vec<NbFeature>,
}

/// Columns whose training values are all 0 or 1 are modelled as Bernoulli,
/// everything else as Gaussian.
pub fn train_naive_bayes(rows: &[Vec<f64>], labels: &[u8]) -> Result<NaiveBayesModel, BaselineError> {
    if rows.len() != labels.len() {
        return Err(BaselineError::LengthMismatch {
            values: rows.len(),
            labels: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(BaselineError::DegenerateData("no rows".into()));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(BaselineError::DegenerateData("rows differ in length".into()));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let k = classes.len();
    let idx: Vec<usize> = labels.iter().map(|l| classes.binary_search(l).unwrap()).collect();
    let mut n_class = vec![0usize; k];
    for &c in &idx {
        n_class[c] += 1;
    }
    let n = rows.len() as f64;
    let log_priors = n_class.iter().map(|&m| (m as f64 / n).ln()).collect();

    let features = (0..d)
        .map(|j| {
            let binary = rows.iter().all(|r| r[j] == 0.0 || r[j] == 1.0);
            if binary {
                let mut ones = vec![0.0; k];
                for (r, &c) in rows.iter().zip(&idx) {
                    ones[c] += r[j];
                }
                let p: Vec<f64> = (0..k)
                    .map(|c| (ones[c] + NB_ALPHA) / (n_class[c] as f64 + 2.0 * NB_ALPHA))
                    .collect();
                NbFeature::Bernoulli {
                    log_p: p.iter().map(|p| p.ln()).collect(),
                    log_q: p.iter().map(|p| (1.0 - p).ln()).collect(),
                }
            } else {
                let mut sum = vec![0.0; k];
                for (r, &c) in rows.iter().zip(&idx) {
                    sum[c] += r[j];
                }
                let mean: Vec<f64> = (0..k).map(|c| sum[c] / n_class[c] as f64).collect();
                let mut ss = vec![0.0; k];
                for (r, &c) in rows.iter().zip(&idx) {
                    ss[c] += (r[j] - mean[c]).powi(2);
                }
                let var = (0..k)
                    .map(|c| (ss[c] / n_class[c] as f64).max(NB_VAR_FLOOR))
                    .collect();
                NbFeature::Gaussian { mean, var }
            }
        })
        .collect();
    Ok(NaiveBayesModel {
        classes,
        log_priors,
        features,
    })
}

impl NaiveBayesModel {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn log_posteriors(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.log_priors.clone();
        for (f, &v) in self.features.iter().zip(x) {
            match f {
                NbFeature::Bernoulli { log_p, log_q } => {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += v * log_p[c] + (1.0 - v) * log_q[c];
                    }
                }
                NbFeature::Gaussian { mean, var } => {
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += -0.5 * (2.0 * std::f64::consts::PI * var[c]).ln()
                            - (v - mean[c]).powi(2) / (2.0 * var[c]);
                    }
                }
            }
        }
        out
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.log_posteriors(x))
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        self.classes[argmax(&self.log_posteriors(x))]
    }
}
