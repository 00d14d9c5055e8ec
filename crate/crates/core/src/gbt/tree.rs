//! Regression trees fitted to second-order gradient statistics.
//!
//! Trees are grown level by level. For every feature the rows are scanned
//! once in presorted order, accumulating left-hand gradient sums per open
//! node, so a level costs one pass over the column regardless of how many
//! nodes it holds. Candidate thresholds sit halfway between consecutive
//! distinct values; rows with `x < threshold` go left.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GbtParams;

const MIN_HESSIAN: f64 = 1e-16;
const MIN_SPLIT_GAIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        feature_id: String,
        threshold: f64,
        gain: f64,
        /// Weight this node would carry as a leaf; used for attribution.
        value: f64,
        /// Hessian mass that reached the node during training.
        cover: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn value(&self) -> f64 {
        match self {
            TreeNode::Split { value, .. } | TreeNode::Leaf { value, .. } => *value,
        }
    }

    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }

    /// Leaf weight reached by `x`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Visits every split node.
    pub fn for_each_split(&self, f: &mut impl FnMut(&TreeNode)) {
        if let TreeNode::Split { left, right, .. } = self {
            f(self);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Column-major copy of the training matrix with per-feature row orderings.
pub(crate) struct Columns {
    pub values: Vec<Vec<f64>>,
    pub sorted: Vec<Vec<u32>>,
    /// Features with a single distinct value can never split.
    pub splittable: Vec<usize>,
}

impl Columns {
    pub fn new(rows: &[Vec<f64>], n_features: usize) -> Columns {
        let values: Vec<Vec<f64>> = (0..n_features)
            .map(|f| rows.iter().map(|r| r[f]).collect())
            .collect();
        let sorted: Vec<Vec<u32>> = values
            .par_iter()
            .map(|col| {
                let mut idx: Vec<u32> = (0..col.len() as u32).collect();
                idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        let splittable = (0..n_features)
            .filter(|&f| {
                let col = &values[f];
                col.iter().any(|&v| v != col[0])
            })
            .collect();
        Columns {
            values,
            sorted,
            splittable,
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    left_g: f64,
    left_h: f64,
}

enum Shape {
    Open,
    Leaf,
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
}

struct BuildNode {
    g: f64,
    h: f64,
    shape: Shape,
}

fn weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Grows one tree on the rows listed in `sample`.
pub(crate) fn grow(
    cols: &Columns,
    feature_ids: &[String],
    grad: &[f64],
    hess: &[f64],
    sample: &[u32],
    params: &GbtParams,
) -> TreeNode {
    let n = grad.len();
    let lambda = params.lambda;
    let mut node_of: Vec<i32> = vec![-1; n];
    let (mut g0, mut h0) = (0.0, 0.0);
    for &r in sample {
        node_of[r as usize] = 0;
        g0 += grad[r as usize];
        h0 += hess[r as usize].max(MIN_HESSIAN);
    }
    let mut nodes = vec![BuildNode {
        g: g0,
        h: h0,
        shape: Shape::Open,
    }];
    let mut frontier: Vec<usize> = vec![0];

    for _depth in 0..params.max_depth {
        if frontier.is_empty() {
            break;
        }
        let mut slot_of = vec![-1i32; nodes.len()];
        for (slot, &node) in frontier.iter().enumerate() {
            slot_of[node] = slot as i32;
        }
        let totals: Vec<(f64, f64)> = frontier.iter().map(|&i| (nodes[i].g, nodes[i].h)).collect();

        let per_feature: Vec<Vec<Option<Candidate>>> = cols
            .splittable
            .par_iter()
            .map(|&f| {
                scan_feature(f, cols, grad, hess, &node_of, &slot_of, &totals, params)
            })
            .collect();

        let mut best: Vec<Option<Candidate>> = vec![None; frontier.len()];
        for cands in &per_feature {
            for (slot, cand) in cands.iter().enumerate() {
                if let Some(c) = cand {
                    if best[slot].is_none_or(|b| c.gain > b.gain) {
                        best[slot] = Some(*c);
                    }
                }
            }
        }

        let mut next = Vec::new();
        let mut split_any = false;
        for (slot, &node) in frontier.iter().enumerate() {
            match best[slot] {
                Some(c) if c.gain > MIN_SPLIT_GAIN => {
                    let (g, h) = totals[slot];
                    let left = nodes.len();
                    nodes.push(BuildNode {
                        g: c.left_g,
                        h: c.left_h,
                        shape: Shape::Open,
                    });
                    nodes.push(BuildNode {
                        g: g - c.left_g,
                        h: h - c.left_h,
                        shape: Shape::Open,
                    });
                    nodes[node].shape = Shape::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        gain: c.gain,
                        left,
                        right: left + 1,
                    };
                    next.push(left);
                    next.push(left + 1);
                    split_any = true;
                }
                _ => nodes[node].shape = Shape::Leaf,
            }
        }
        if split_any {
            for &r in sample {
                let node = node_of[r as usize] as usize;
                if let Shape::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } = nodes[node].shape
                {
                    let go_left = cols.values[feature][r as usize] < threshold;
                    node_of[r as usize] = if go_left { left } else { right } as i32;
                }
            }
        }
        frontier = next;
    }

    to_tree(&nodes, 0, feature_ids, lambda)
}

#[allow(clippy::too_many_arguments)]
fn scan_feature(
    f: usize,
    cols: &Columns,
    grad: &[f64],
    hess: &[f64],
    node_of: &[i32],
    slot_of: &[i32],
    totals: &[(f64, f64)],
    params: &GbtParams,
) -> Vec<Option<Candidate>> {
    let lambda = params.lambda;
    let mcw = params.min_child_weight;
    let k = totals.len();
    let mut gl = vec![0.0; k];
    let mut hl = vec![0.0; k];
    let mut last: Vec<Option<f64>> = vec![None; k];
    let mut best: Vec<Option<Candidate>> = vec![None; k];
    let col = &cols.values[f];
    for &r in &cols.sorted[f] {
        let r = r as usize;
        let node = node_of[r];
        if node < 0 {
            continue;
        }
        let slot = slot_of[node as usize];
        if slot < 0 {
            continue;
        }
        let s = slot as usize;
        let v = col[r];
        if let Some(prev) = last[s] {
            if v > prev {
                let (g, h) = totals[s];
                let (gr, hr) = (g - gl[s], h - hl[s]);
                if hl[s] >= mcw && hr >= mcw {
                    let gain = 0.5 * (score(gl[s], hl[s], lambda) + score(gr, hr, lambda) - score(g, h, lambda));
                    if best[s].is_none_or(|b| gain > b.gain) {
                        let mut threshold = prev + (v - prev) / 2.0;
                        if threshold <= prev {
                            threshold = v;
                        }
                        best[s] = Some(Candidate {
                            gain,
                            feature: f,
                            threshold,
                            left_g: gl[s],
                            left_h: hl[s],
                        });
                    }
                }
            }
        }
        gl[s] += grad[r];
        hl[s] += hess[r].max(MIN_HESSIAN);
        last[s] = Some(v);
    }
    best
}

fn to_tree(nodes: &[BuildNode], i: usize, feature_ids: &[String], lambda: f64) -> TreeNode {
    let node = &nodes[i];
    let value = weight(node.g, node.h, lambda);
    match node.shape {
        Shape::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        } => TreeNode::Split {
            feature,
            feature_id: feature_ids[feature].clone(),
            threshold,
            gain,
            value,
            cover: node.h,
            left: Box::new(to_tree(nodes, left, feature_ids, lambda)),
            right: Box::new(to_tree(nodes, right, feature_ids, lambda)),
        },
        Shape::Open | Shape::Leaf => TreeNode::Leaf {
            value,
            cover: node.h,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(depth: usize) -> GbtParams {
        GbtParams {
            max_depth: depth,
            min_child_weight: 0.0,
            ..GbtParams::default()
        }
    }

    /// Exhaustive split search on one feature: every cut between sorted
    /// distinct values, gain from explicit left/right sums.
    fn brute_best_split(x: &[f64], g: &[f64], h: &[f64], lambda: f64) -> (f64, f64) {
        let mut vals: Vec<f64> = x.to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        let total_g: f64 = g.iter().sum();
        let total_h: f64 = h.iter().sum();
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut lg, mut lh) = (0.0, 0.0);
            for i in 0..x.len() {
                if x[i] < t {
                    lg += g[i];
                    lh += h[i];
                }
            }
            let (rg, rh) = (total_g - lg, total_h - lh);
            let gain = 0.5
                * (lg * lg / (lh + lambda) + rg * rg / (rh + lambda) - total_g * total_g / (total_h + lambda));
            if gain > best.0 {
                best = (gain, t);
            }
        }
        best
    }

    #[test]
    fn stump_matches_exhaustive_search() {
        let x = [0.1, 0.9, 0.3, 0.7, 0.2, 0.8, 0.45, 0.55];
        let g = [0.5, -0.5, 0.4, -0.3, 0.6, -0.7, 0.1, -0.2];
        let h = [0.25; 8];
        let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v]).collect();
        let cols = Columns::new(&rows, 1);
        let sample: Vec<u32> = (0..8).collect();
        let tree = grow(&cols, &["f".into()], &g, &h, &sample, &params(1));
        let (gain, threshold) = brute_best_split(&x, &g, &h, 1.0);
        match tree {
            TreeNode::Split {
                threshold: t,
                gain: gn,
                ref left,
                ref right,
                ..
            } => {
                assert!((t - threshold).abs() < 1e-12);
                assert!((gn - gain).abs() < 1e-12);
                assert!(matches!(**left, TreeNode::Leaf { .. }));
                assert!(matches!(**right, TreeNode::Leaf { .. }));
            }
            TreeNode::Leaf { .. } => panic!("expected a split"),
        }
    }

    #[test]
    fn constant_feature_gives_leaf() {
        let rows = vec![vec![1.0]; 4];
        let cols = Columns::new(&rows, 1);
        let g = [1.0, -1.0, 0.5, 0.5];
        let h = [1.0; 4];
        let tree = grow(&cols, &["f".into()], &g, &h, &[0, 1, 2, 3], &params(3));
        // -G/(H+lambda) = -1/(4+1)
        assert_eq!(tree, TreeNode::Leaf { value: -0.2, cover: 4.0 });
    }

    #[test]
    fn depth_is_bounded() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, (i * 7 % 13) as f64]).collect();
        let cols = Columns::new(&rows, 2);
        let g: Vec<f64> = (0..64).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let h = vec![1.0; 64];
        let sample: Vec<u32> = (0..64).collect();
        for depth in 1..5 {
            let tree = grow(&cols, &["a".into(), "b".into()], &g, &h, &sample, &params(depth));
            assert!(tree.depth() <= depth);
        }
    }

    #[test]
    fn unsampled_rows_are_ignored() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let cols = Columns::new(&rows, 1);
        let g = [1.0, 1.0, -100.0, -100.0];
        let h = [1.0; 4];
        let tree = grow(&cols, &["f".into()], &g, &h, &[0, 1], &params(2));
        assert_eq!(tree, TreeNode::Leaf { value: -2.0 / 3.0, cover: 2.0 });
    }
}
