//! Syntactic features: part-of-speech proportions and dependency label paths.
//!
//! A label path is the sequence of dependency relations met when walking
//! down from any token to one of its descendants, at most `max_edges` steps
//! deep. Node identities are dropped, so "the cat sleeps" yields `nsubj`,
//! `det` and `nsubj_det`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conllu::{ParsedDocument, Sentence};
use crate::tagset::PENN_TAGS;

pub const DEFAULT_MAX_EDGES: usize = 5;

/// A descending chain of dependency labels.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubtreePath(Vec<String>);

impl SubtreePath {
    pub fn new(labels: Vec<String>) -> SubtreePath {
        assert!(!labels.is_empty(), "a subtree path has at least one edge");
        SubtreePath(labels)
    }

    pub fn from_key(key: &str) -> SubtreePath {
        SubtreePath::new(key.split('_').map(str::to_string).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn edges(&self) -> usize {
        self.0.len()
    }

    /// Canonical key: labels joined by `_`.
    pub fn key(&self) -> String {
        self.0.join("_")
    }
}

impl fmt::Display for SubtreePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtreeMode {
    /// 1 when the path occurs at least once.
    #[default]
    Binary,
    /// Occurrences divided by the number of paths extracted from the document.
    Normalized,
}

/// Fraction of tokens carrying each registry tag. Always 45 entries, in
/// registry order.
#[derive(Clone, Debug, PartialEq)]
pub struct PosDistribution {
    fractions: [f64; PENN_TAGS.len()],
    /// Tokens whose tag fell into the OTHER bucket.
    pub other: usize,
}

impl PosDistribution {
    pub fn fractions(&self) -> &[f64] {
        &self.fractions
    }

    pub fn get(&self, tag: &str) -> f64 {
        crate::tagset::tag_index(tag).map_or(0.0, |i| self.fractions[i])
    }

    pub fn to_map(&self) -> BTreeMap<&'static str, f64> {
        PENN_TAGS.iter().copied().zip(self.fractions.iter().copied()).collect()
    }
}

/// Tag counts divided by the document's word count.
pub fn pos_distribution(doc: &ParsedDocument) -> PosDistribution {
    let mut counts = [0usize; PENN_TAGS.len()];
    let mut other = 0;
    let mut total = 0;
    for token in doc.tokens() {
        total += 1;
        match token.tag_index() {
            Some(i) => counts[i] += 1,
            None => other += 1,
        }
    }
    if other > 0 {
        log::warn!(
            "document {}: {other} token(s) with tags outside the Penn registry",
            doc.id
        );
    }
    let mut fractions = [0.0; PENN_TAGS.len()];
    if total > 0 {
        for (f, c) in fractions.iter_mut().zip(counts) {
            *f = c as f64 / total as f64;
        }
    }
    PosDistribution { fractions, other }
}

fn walk<'a>(
    sentence: &'a Sentence,
    children: &[Vec<usize>],
    node: usize,
    max_edges: usize,
    path: &mut Vec<&'a str>,
    emit: &mut dyn FnMut(&[&'a str]),
) {
    if path.len() == max_edges {
        return;
    }
    for &child in &children[node] {
        path.push(&sentence.tokens[child].deprel);
        emit(path);
        walk(sentence, children, child, max_edges, path, emit);
        path.pop();
    }
}

/// Calls `emit` once per descending label chain of length `1..=max_edges`,
/// sentence by sentence.
pub fn for_each_path<'a>(doc: &'a ParsedDocument, max_edges: usize, mut emit: impl FnMut(&[&'a str])) {
    let mut path = Vec::with_capacity(max_edges);
    for sentence in &doc.sentences {
        let children = sentence.children();
        for start in 0..sentence.len() {
            walk(sentence, &children, start, max_edges, &mut path, &mut emit);
        }
    }
}

/// Multiset of label paths with their occurrence counts.
pub fn enumerate_subtree_paths(doc: &ParsedDocument, max_edges: usize) -> BTreeMap<SubtreePath, usize> {
    let mut out = BTreeMap::new();
    for_each_path(doc, max_edges, |labels| {
        let path = SubtreePath(labels.iter().map(|s| s.to_string()).collect());
        *out.entry(path).or_insert(0) += 1;
    });
    out
}

/// Path counts keyed by canonical key, plus the total number of paths.
pub fn path_key_counts(doc: &ParsedDocument, max_edges: usize) -> (BTreeMap<String, usize>, usize) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0;
    let mut key = String::new();
    for_each_path(doc, max_edges, |labels| {
        key.clear();
        for (i, l) in labels.iter().enumerate() {
            if i > 0 {
                key.push('_');
            }
            key.push_str(l);
        }
        total += 1;
        match counts.get_mut(key.as_str()) {
            Some(c) => *c += 1,
            None => {
                counts.insert(key.clone(), 1);
            }
        }
    });
    (counts, total)
}

/// Feature value for every path in `vocabulary`; paths outside it are ignored.
pub fn subtree_feature_values(
    doc: &ParsedDocument,
    vocabulary: &BTreeSet<SubtreePath>,
    mode: SubtreeMode,
    max_edges: usize,
) -> BTreeMap<SubtreePath, f64> {
    let paths = enumerate_subtree_paths(doc, max_edges);
    let total: usize = paths.values().sum();
    vocabulary
        .iter()
        .map(|p| {
            let count = paths.get(p).copied().unwrap_or(0);
            let value = match mode {
                SubtreeMode::Binary => (count > 0) as u8 as f64,
                SubtreeMode::Normalized if total > 0 => count as f64 / total as f64,
                SubtreeMode::Normalized => 0.0,
            };
            (p.clone(), value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{random_tree, the_cat_sleeps, DocBuilder};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn keys(paths: &BTreeMap<SubtreePath, usize>) -> Vec<(String, usize)> {
        paths.iter().map(|(p, &c)| (p.key(), c)).collect()
    }

    #[test]
    fn the_cat_sleeps_paths() {
        let paths = enumerate_subtree_paths(&the_cat_sleeps(), 5);
        assert_eq!(
            keys(&paths),
            [("det".to_string(), 1), ("nsubj".to_string(), 1), ("nsubj_det".to_string(), 1)]
        );
    }

    #[test]
    fn single_token_has_no_paths() {
        let doc = DocBuilder::new("one").sentence(&[("hi", "UH", 0, "ROOT")]).build();
        assert!(enumerate_subtree_paths(&doc, 5).is_empty());
    }

    #[test]
    fn max_edges_caps_depth() {
        let words: Vec<(&str, &str)> = (0..8).map(|_| ("x", "NN")).collect();
        let doc = DocBuilder::new("c").chain_sentence(&words).build();
        let paths = enumerate_subtree_paths(&doc, 3);
        assert_eq!(keys(&paths), [
            ("dep".to_string(), 7),
            ("dep_dep".to_string(), 6),
            ("dep_dep_dep".to_string(), 5),
        ]);
    }

    #[test]
    fn paths_do_not_cross_sentences() {
        let doc = DocBuilder::new("two")
            .sentence(&[("a", "NN", 0, "ROOT"), ("b", "NN", 1, "x")])
            .sentence(&[("c", "NN", 0, "ROOT"), ("d", "NN", 1, "y")])
            .build();
        let paths = enumerate_subtree_paths(&doc, 5);
        assert_eq!(keys(&paths), [("x".to_string(), 1), ("y".to_string(), 1)]);
    }

    #[test]
    fn pos_distribution_of_the_cat_sleeps() {
        let dist = pos_distribution(&the_cat_sleeps());
        for tag in ["DT", "NN", "VBZ"] {
            assert_eq!(dist.get(tag), 1.0 / 3.0);
        }
        assert_eq!(dist.fractions().iter().filter(|&&f| f > 0.0).count(), 3);
        assert_eq!(dist.to_map().len(), 45);
    }

    #[test]
    fn pos_distribution_empty_and_hand_count() {
        let empty = pos_distribution(&ParsedDocument::new("e"));
        assert!(empty.fractions().iter().all(|&f| f == 0.0));

        let tags = ["JJ", "NN", "JJ", "DT", "NN", "VBZ", "RB", "IN"];
        let words: Vec<(&str, &str)> = tags.iter().map(|&t| ("w", t)).collect();
        let doc = DocBuilder::new("eight").chain_sentence(&words).build();
        // hand count: 2 of 8 tokens are JJ
        assert_eq!(pos_distribution(&doc).get("JJ"), 0.25);
    }

    #[test]
    fn unknown_tags_go_to_other() {
        let doc = DocBuilder::new("o")
            .chain_sentence(&[("a", "NN"), ("b", "_SP"), ("c", "ADD")])
            .build();
        let dist = pos_distribution(&doc);
        assert_eq!(dist.other, 2);
        assert_eq!(dist.get("NN"), 1.0 / 3.0);
    }

    #[test]
    fn feature_values_binary_and_normalized() {
        let doc = the_cat_sleeps();
        let vocab: BTreeSet<SubtreePath> = ["nsubj", "nsubj_det", "advmod"]
            .iter()
            .map(|k| SubtreePath::from_key(k))
            .collect();
        let bin = subtree_feature_values(&doc, &vocab, SubtreeMode::Binary, 5);
        let get = |m: &BTreeMap<SubtreePath, f64>, k: &str| m[&SubtreePath::from_key(k)];
        assert_eq!(get(&bin, "nsubj"), 1.0);
        assert_eq!(get(&bin, "nsubj_det"), 1.0);
        assert_eq!(get(&bin, "advmod"), 0.0);

        // three paths in total, each seen once
        let norm = subtree_feature_values(&doc, &vocab, SubtreeMode::Normalized, 5);
        assert_eq!(get(&norm, "nsubj"), 1.0 / 3.0);
        assert_eq!(get(&norm, "nsubj_det"), 1.0 / 3.0);
        assert_eq!(get(&norm, "advmod"), 0.0);

        let empty = ParsedDocument::new("e");
        for mode in [SubtreeMode::Binary, SubtreeMode::Normalized] {
            assert!(subtree_feature_values(&empty, &vocab, mode, 5).values().all(|&v| v == 0.0));
        }
    }

    /// Ancestor walk: every (ancestor, descendant) pair within `k` edges
    /// contributes the labels found on the way back down.
    fn oracle(sentence: &Sentence, k: usize) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for d in 0..sentence.len() {
            let mut labels = Vec::new();
            let mut node = d;
            while sentence.tokens[node].head != 0 && labels.len() < k {
                labels.push(sentence.tokens[node].deprel.clone());
                node = sentence.tokens[node].head - 1;
                let mut down = labels.clone();
                down.reverse();
                *out.entry(down.join("_")).or_insert(0) += 1;
            }
        }
        out
    }

    #[test]
    fn random_trees_match_ancestor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rand::Rng::gen_range(&mut rng, 1..=12);
            let sentence = random_tree(&mut rng, n, &["a", "b", "c", "d", "e", "f"]);
            let expected = oracle(&sentence, 5);
            let doc = ParsedDocument {
                sentences: vec![sentence],
                ..Default::default()
            };
            let (got, total) = path_key_counts(&doc, 5);
            assert_eq!(got, expected);
            assert_eq!(total, expected.values().sum::<usize>());
        }
    }

    proptest! {
        #[test]
        fn chain_count_formula(n in 1usize..20, k in 1usize..7) {
            let words: Vec<(&str, &str)> = (0..n).map(|_| ("x", "NN")).collect();
            let doc = DocBuilder::new("c").chain_sentence(&words).build();
            let (_, total) = path_key_counts(&doc, k);
            let expected: usize = (1..=k.min(n.saturating_sub(1))).map(|m| n - m).sum();
            prop_assert_eq!(total, expected);
        }

        #[test]
        fn paths_ignore_surface_and_lemma(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sentence = random_tree(&mut rng, n, &["a", "b", "c"]);
            let mut doc = ParsedDocument { sentences: vec![sentence], ..Default::default() };
            let before = enumerate_subtree_paths(&doc, 5);
            for t in &mut doc.sentences[0].tokens {
                t.form = "zzz".into();
                t.lemma = "zzz".into();
            }
            prop_assert_eq!(enumerate_subtree_paths(&doc, 5), before);
        }

        #[test]
        fn non_empty_pos_sums_to_one(seed in any::<u64>(), n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let doc = ParsedDocument {
                sentences: vec![random_tree(&mut rng, n, &["a"])],
                ..Default::default()
            };
            let sum: f64 = pos_distribution(&doc).fractions().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}
