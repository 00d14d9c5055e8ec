//! Per-prediction attribution by path decomposition.
//!
//! Walking a tree from root to leaf, the change in node weight at each split
//! is credited to the split feature. The root weights, summed over the
//! class's trees and scaled by the learning rate, form the bias term, so
//! `bias + sum(contributions)` reproduces the class raw score exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{GbtError, GbtModel, TreeNode};

pub const BIAS_LABEL: &str = "Bias term";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub class_id: u8,
    pub bias: f64,
    pub contributions: BTreeMap<String, f64>,
    pub raw_score: f64,
}

impl Attribution {
    /// `bias + sum(contributions) - raw_score`; zero up to rounding.
    pub fn residual(&self) -> f64 {
        self.bias + self.contributions.values().sum::<f64>() - self.raw_score
    }
}

impl GbtModel {
    pub fn explain(&self, x: &[f64], class_id: u8) -> Result<Attribution, GbtError> {
        self.check_dim(x)?;
        let k = self.class_index(class_id)?;
        let lr = self.learning_rate;
        let mut bias = 0.0;
        let mut raw = 0.0;
        let mut contributions: BTreeMap<String, f64> = BTreeMap::new();
        for tree in &self.trees[k] {
            bias += lr * tree.value();
            let mut node = tree;
            while let TreeNode::Split {
                feature,
                feature_id,
                threshold,
                value,
                left,
                right,
                ..
            } = node
            {
                let child: &TreeNode = if x[*feature] < *threshold { left } else { right };
                *contributions.entry(feature_id.clone()).or_insert(0.0) += lr * (child.value() - value);
                node = child;
            }
            raw += lr * node.value();
        }
        Ok(Attribution {
            class_id,
            bias,
            contributions,
            raw_score: raw,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionRow {
    pub feature: String,
    pub value: f64,
    pub contribution: f64,
}

/// Top and bottom contributions for one prediction, bias included as a row
/// with value 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContributionTable {
    pub doc_id: String,
    pub class_id: u8,
    pub raw_score: f64,
    pub top: Vec<ContributionRow>,
    pub bottom: Vec<ContributionRow>,
}

impl ContributionTable {
    pub fn new(doc_id: &str, attribution: &Attribution, feature_ids: &[String], x: &[f64], n: usize) -> ContributionTable {
        let mut rows: Vec<ContributionRow> = attribution
            .contributions
            .iter()
            .map(|(id, &c)| ContributionRow {
                feature: id.clone(),
                value: feature_ids.iter().position(|f| f == id).map_or(f64::NAN, |i| x[i]),
                contribution: c,
            })
            .collect();
        rows.push(ContributionRow {
            feature: BIAS_LABEL.to_string(),
            value: 1.0,
            contribution: attribution.bias,
        });
        rows.sort_by(|a, b| b.contribution.total_cmp(&a.contribution).then_with(|| a.feature.cmp(&b.feature)));
        let top_n = n.min(rows.len());
        let bottom_n = n.min(rows.len() - top_n);
        let bottom = rows.split_off(rows.len() - bottom_n);
        rows.truncate(top_n);
        ContributionTable {
            doc_id: doc_id.to_string(),
            class_id: attribution.class_id,
            raw_score: attribution.raw_score,
            top: rows,
            bottom,
        }
    }

    /// Aligned text table: feature, value, signed contribution.
    pub fn render(&self) -> String {
        let width = self
            .top
            .iter()
            .chain(&self.bottom)
            .map(|r| r.feature.len())
            .max()
            .unwrap_or(7)
            .max(7);
        let mut out = String::new();
        let _ = writeln!(out, "document {}  IC = {}  raw score {:+.3}", self.doc_id, self.class_id, self.raw_score);
        let _ = writeln!(out, "{:<width$}  {:>7}  {:>12}", "Feature", "Value", "Contribution");
        let line = |out: &mut String, r: &ContributionRow| {
            let _ = writeln!(out, "{:<width$}  {:>7.3}  {:>+12.3}", r.feature, r.value, r.contribution);
        };
        for r in &self.top {
            line(&mut out, r);
        }
        if !self.bottom.is_empty() {
            let _ = writeln!(out, "{}", "-".repeat(width + 23));
            for r in &self.bottom {
                line(&mut out, r);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::{train, GbtParams};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn stump() -> GbtModel {
        let leaf = |value| Box::new(TreeNode::Leaf { value, cover: 1.0 });
        let tree = TreeNode::Split {
            feature: 1,
            feature_id: "f".into(),
            threshold: 0.5,
            gain: 2.0,
            value: 0.2,
            cover: 2.0,
            left: leaf(-0.4),
            right: leaf(0.6),
        };
        let mut model = GbtModel::constant(vec![1, 2], vec!["e".into(), "f".into()], GbtParams::default());
        model.trees[1].push(tree);
        model
    }

    #[test]
    fn zero_tree_model_has_empty_attribution() {
        let model = GbtModel::constant(vec![1, 2, 3], vec!["a".into()], GbtParams::default());
        let a = model.explain(&[0.0], 2).unwrap();
        assert_eq!(a.bias, 0.0);
        assert!(a.contributions.is_empty());
        assert_eq!(a.raw_score, 0.0);
    }

    #[test]
    fn stump_credits_leaf_minus_root() {
        let model = stump();
        let a = model.explain(&[0.0, 0.9], 2).unwrap();
        // learning rate 0.1: bias 0.1 * 0.2, credit 0.1 * (0.6 - 0.2)
        assert!((a.bias - 0.02).abs() < 1e-15);
        assert!((a.contributions["f"] - 0.04).abs() < 1e-15);
        assert!((a.raw_score - 0.06).abs() < 1e-15);
        assert_eq!(a.contributions.len(), 1);
        let left = model.explain(&[0.0, 0.1], 2).unwrap();
        assert!((left.contributions["f"] + 0.06).abs() < 1e-15);
    }

    #[test]
    fn unknown_class_and_dimension() {
        let model = stump();
        assert!(matches!(model.explain(&[0.0, 0.0], 9), Err(GbtError::UnknownClass(9))));
        assert!(matches!(model.explain(&[0.0], 1), Err(GbtError::DimensionMismatch { .. })));
    }

    #[test]
    fn table_keeps_bias_row_and_splits_top_bottom() {
        let model = stump();
        let x = [0.0, 0.9];
        let a = model.explain(&x, 2).unwrap();
        let table = ContributionTable::new("d", &a, &model.feature_ids, &x, 10);
        assert_eq!(table.top.len(), 2);
        assert!(table.bottom.is_empty());
        assert_eq!(table.top[0].feature, "f");
        assert_eq!(table.top[0].value, 0.9);
        assert_eq!(table.top[1].feature, BIAS_LABEL);
        let text = table.render();
        assert!(text.contains("Bias term"));
        assert!(text.contains("+0.040"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn reconstruction_identity(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..40).map(|_| (0..4).map(|_| rng.gen()).collect()).collect();
            let labels: Vec<u8> = rows.iter().map(|r| 1 + (r[0] * 3.0) as u8).collect();
            let ids: Vec<String> = (0..4).map(|i| format!("f{i}")).collect();
            let params = GbtParams { n_rounds: 15, max_depth: 4, ..GbtParams::default() };
            let model = train(&rows, &labels, &ids, &params, seed).unwrap().model;
            let x: Vec<f64> = (0..4).map(|_| rng.gen()).collect();
            let raw = model.raw_scores(&x).unwrap();
            for (k, &class) in model.classes.iter().enumerate() {
                let a = model.explain(&x, class).unwrap();
                prop_assert!((a.raw_score - raw[k]).abs() < 1e-12);
                prop_assert!(a.residual().abs() < 1e-6);
            }
        }
    }
}
