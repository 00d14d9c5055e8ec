//! Multiclass gradient-boosted decision trees.
//!
//! Training minimises softmax cross-entropy. Every round computes class
//! probabilities from the current raw scores, then fits one regression tree
//! per class to that class's gradients and hessians on a row subsample. The
//! subsample for (round, class) is drawn from a ChaCha stream keyed by
//! `(seed, round, class)`, so a model depends only on its data, parameters
//! and seed.
//!
//! Raw score of class `k` is `learning_rate * sum(tree(x))` over the class's
//! trees; probabilities are the softmax of raw scores.

mod explain;
mod tree;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use explain::{Attribution, ContributionRow, ContributionTable};
pub use tree::TreeNode;

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("no training rows")]
    EmptyData,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("class {0} is not known to the model")]
    UnknownClass(u8),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    /// Boosting rounds; each round adds one tree per class.
    pub n_rounds: usize,
    pub max_depth: usize,
    pub subsample: f64,
    pub learning_rate: f64,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 500,
            max_depth: 6,
            subsample: 0.8,
            learning_rate: 0.1,
            lambda: 1.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |msg: &str| Err(GbtError::InvalidParams(msg.to_string()));
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must lie in (0, 1]");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be non-negative");
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return bad("min_child_weight must be non-negative");
        }
        Ok(())
    }
}

/// A trained ensemble. `trees[k]` holds the trees of `classes[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub classes: Vec<u8>,
    pub feature_ids: Vec<String>,
    pub feature_space_ref: String,
    pub learning_rate: f64,
    pub params: GbtParams,
    pub seed: u64,
    pub trees: Vec<Vec<TreeNode>>,
}

impl GbtModel {
    /// A model with no trees: every class scores 0.
    pub fn constant(classes: Vec<u8>, feature_ids: Vec<String>, params: GbtParams) -> GbtModel {
        GbtModel {
            trees: vec![Vec::new(); classes.len()],
            classes,
            feature_ids,
            feature_space_ref: String::new(),
            learning_rate: params.learning_rate,
            params,
            seed: 0,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), GbtError> {
        if x.len() != self.n_features() {
            return Err(GbtError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn class_index(&self, class: u8) -> Result<usize, GbtError> {
        self.classes
            .iter()
            .position(|&c| c == class)
            .ok_or(GbtError::UnknownClass(class))
    }

    pub fn raw_scores(&self, x: &[f64]) -> Result<Vec<f64>, GbtError> {
        self.check_dim(x)?;
        Ok(self
            .trees
            .iter()
            .map(|trees| self.learning_rate * trees.iter().map(|t| t.predict(x)).sum::<f64>())
            .collect())
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, GbtError> {
        Ok(softmax(&self.raw_scores(x)?))
    }

    /// Class with the highest raw score; ties go to the lower class id.
    pub fn predict(&self, x: &[f64]) -> Result<u8, GbtError> {
        let scores = self.raw_scores(x)?;
        Ok(self.classes[argmax(&scores)])
    }

    /// Mean split gain of every feature used anywhere in the ensemble.
    pub fn feature_importance(&self) -> BTreeMap<String, f64> {
        let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for tree in self.trees.iter().flatten() {
            tree.for_each_split(&mut |node| {
                if let TreeNode::Split { feature_id, gain, .. } = node {
                    let e = sums.entry(feature_id.clone()).or_insert((0.0, 0));
                    e.0 += gain;
                    e.1 += 1;
                }
            });
        }
        sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<GbtModel> {
        serde_json::from_str(text)
    }
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn subsample_rng(seed: u64, round: usize, class: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(round as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(class as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn draw_sample(n: usize, fraction: f64, seed: u64, round: usize, class: usize) -> Vec<u32> {
    if fraction >= 1.0 {
        return (0..n as u32).collect();
    }
    let m = ((n as f64 * fraction).round() as usize).clamp(1, n);
    let mut rng = subsample_rng(seed, round, class);
    let mut rows: Vec<u32> = rand::seq::index::sample(&mut rng, n, m)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    rows.sort_unstable();
    rows
}

/// Mean softmax cross-entropy of `scores` (row-major, `n x k`).
fn log_loss(scores: &[f64], targets: &[usize], k: usize) -> f64 {
    let n = targets.len();
    let mut total = 0.0;
    for (i, &t) in targets.iter().enumerate() {
        let row = &scores[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        total += lse - row[t];
    }
    total / n as f64
}

/// Result of a training run.
pub struct TrainOutcome {
    pub model: GbtModel,
    /// Training log-loss after each round.
    pub round_losses: Vec<f64>,
}

/// Fits a boosted ensemble. A single-class training set yields a constant
/// model for that class.
pub fn train(
    rows: &[Vec<f64>],
    labels: &[u8],
    feature_ids: &[String],
    params: &GbtParams,
    seed: u64,
) -> Result<TrainOutcome, GbtError> {
    params.validate()?;
    if rows.len() != labels.len() {
        return Err(GbtError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(GbtError::EmptyData);
    }
    let d = feature_ids.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(GbtError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        log::warn!("training data holds a single class; returning a constant model");
        let mut model = GbtModel::constant(classes, feature_ids.to_vec(), params.clone());
        model.seed = seed;
        return Ok(TrainOutcome {
            model,
            round_losses: Vec::new(),
        });
    }

    let n = rows.len();
    let k = classes.len();
    let targets: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label drawn from classes"))
        .collect();
    let cols = tree::Columns::new(rows, d);
    let mut scores = vec![0.0; n * k];
    let mut trees: Vec<Vec<TreeNode>> = vec![Vec::with_capacity(params.n_rounds); k];
    let mut round_losses = Vec::with_capacity(params.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut probs = vec![0.0; n * k];

    for round in 0..params.n_rounds {
        for i in 0..n {
            let p = softmax(&scores[i * k..(i + 1) * k]);
            probs[i * k..(i + 1) * k].copy_from_slice(&p);
        }
        let mut round_trees = Vec::with_capacity(k);
        for class in 0..k {
            for i in 0..n {
                let p = probs[i * k + class];
                grad[i] = p - (targets[i] == class) as u8 as f64;
                hess[i] = p * (1.0 - p);
            }
            let sample = draw_sample(n, params.subsample, seed, round, class);
            round_trees.push(tree::grow(&cols, feature_ids, &grad, &hess, &sample, params));
        }
        for (class, t) in round_trees.into_iter().enumerate() {
            for (i, row) in rows.iter().enumerate() {
                scores[i * k + class] += params.learning_rate * t.predict(row);
            }
            trees[class].push(t);
        }
        round_losses.push(log_loss(&scores, &targets, k));
    }

    Ok(TrainOutcome {
        model: GbtModel {
            classes,
            feature_ids: feature_ids.to_vec(),
            feature_space_ref: String::new(),
            learning_rate: params.learning_rate,
            params: params.clone(),
            seed,
            trees,
        },
        round_losses,
    })
}
