//! Frozen feature index and document vectorization.
//!
//! A [`FeatureSpace`] is fit once on a training corpus and then maps any
//! document to a dense vector laid out as
//! `[semantic | category | pos | subtree | extra]`. Each block can be
//! switched off independently, which is how feature-set ablations are run.
//! Keyword and category resources are embedded in the space so a serialized
//! space is all that is needed to vectorize new text.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::conllu::{IcBand, ParsedDocument};
use crate::lexicon::{CategoryDictionary, Lexicon, Role, HAS_DIFF, HAS_INT};
use crate::syntax::{self, SubtreeMode, DEFAULT_MAX_EDGES};
use crate::tagset::PENN_TAGS;

pub const SPACE_FORMAT: &str = "icscore-feature-space";
pub const SPACE_VERSION: u32 = 1;
pub const DEFAULT_MIN_FREQ: usize = 5;

pub const WORD_COUNT: &str = "word_count";
pub const SENTIMENT: &str = "sentiment";
const POS_PREFIX: &str = "pos:";
const TREE_PREFIX: &str = "tree:";
const LIWC_PREFIX: &str = "liwc:";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("cannot fit a feature space on an empty corpus")]
    EmptyCorpus,
    #[error("the category family is enabled but no category dictionary was supplied")]
    MissingDictionary,
    #[error("feature id {0:?} is used twice")]
    DuplicateId(String),
    #[error("max_edges must be at least 1")]
    InvalidMaxEdges,
    #[error("feature space is inconsistent: {0}")]
    Inconsistent(String),
    #[error("unsupported feature space format {format:?} version {version}")]
    UnsupportedFormat { format: String, version: u32 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Which feature blocks are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFamilies {
    pub vocabulary: bool,
    pub liwc: bool,
    pub pos: bool,
    pub subtrees: bool,
    pub word_count: bool,
    pub sentiment: bool,
}

impl Default for FeatureFamilies {
    fn default() -> Self {
        FeatureSet::VPosTags.families()
    }
}

/// Named combinations of families used in ablation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Wordcount,
    Sentiment,
    PosTags,
    Subtrees,
    Liwc,
    /// POS tags, subtrees and categories together.
    AllSyntactic,
    Vocabulary,
    #[serde(rename = "v_postags", alias = "v_pos_tags")]
    VPosTags,
    VSubtrees,
    All,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 10] = [
        FeatureSet::Wordcount,
        FeatureSet::Sentiment,
        FeatureSet::PosTags,
        FeatureSet::Subtrees,
        FeatureSet::Liwc,
        FeatureSet::AllSyntactic,
        FeatureSet::Vocabulary,
        FeatureSet::VPosTags,
        FeatureSet::VSubtrees,
        FeatureSet::All,
    ];

    pub fn families(self) -> FeatureFamilies {
        let mut f = FeatureFamilies {
            vocabulary: false,
            liwc: false,
            pos: false,
            subtrees: false,
            word_count: false,
            sentiment: false,
        };
        match self {
            FeatureSet::Wordcount => f.word_count = true,
            FeatureSet::Sentiment => f.sentiment = true,
            FeatureSet::PosTags => f.pos = true,
            FeatureSet::Subtrees => f.subtrees = true,
            FeatureSet::Liwc => f.liwc = true,
            FeatureSet::AllSyntactic => {
                f.pos = true;
                f.subtrees = true;
                f.liwc = true;
            }
            FeatureSet::Vocabulary => f.vocabulary = true,
            FeatureSet::VPosTags => {
                f.vocabulary = true;
                f.pos = true;
            }
            FeatureSet::VSubtrees => {
                f.vocabulary = true;
                f.subtrees = true;
            }
            FeatureSet::All => {
                f.vocabulary = true;
                f.pos = true;
                f.subtrees = true;
                f.liwc = true;
            }
        }
        f
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Wordcount => "wordcount",
            FeatureSet::Sentiment => "sentiment",
            FeatureSet::PosTags => "pos_tags",
            FeatureSet::Subtrees => "subtrees",
            FeatureSet::Liwc => "liwc",
            FeatureSet::AllSyntactic => "all_syntactic",
            FeatureSet::Vocabulary => "vocabulary",
            FeatureSet::VPosTags => "v_postags",
            FeatureSet::VSubtrees => "v_subtrees",
            FeatureSet::All => "all",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<FeatureSet, String> {
        let norm = s.to_ascii_lowercase().replace(['-', '+'], "_");
        FeatureSet::ALL
            .into_iter()
            .find(|fs| fs.name() == norm)
            .ok_or_else(|| {
                let names: Vec<_> = FeatureSet::ALL.iter().map(|f| f.name()).collect();
                format!("unknown feature set {s:?}; expected one of {}", names.join(", "))
            })
    }
}

/// How the subtree frequency threshold is counted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyCount {
    /// Total occurrences across the corpus.
    #[default]
    Occurrences,
    /// Number of documents containing the path.
    Documents,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub families: FeatureFamilies,
    pub subtree_mode: SubtreeMode,
    pub max_edges: usize,
    pub min_freq: usize,
    pub frequency_count: FrequencyCount,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            families: FeatureFamilies::default(),
            subtree_mode: SubtreeMode::Binary,
            max_edges: DEFAULT_MAX_EDGES,
            min_freq: DEFAULT_MIN_FREQ,
            frequency_count: FrequencyCount::Occurrences,
        }
    }
}

impl FeatureConfig {
    pub fn with_families(families: FeatureFamilies) -> FeatureConfig {
        FeatureConfig {
            families,
            ..FeatureConfig::default()
        }
    }
}

/// External resources the semantic families draw on.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub lexicon: Lexicon,
    pub dictionary: Option<CategoryDictionary>,
}

#[derive(Serialize, Deserialize)]
struct SpaceRepr {
    format: String,
    version: u32,
    config: FeatureConfig,
    semantic_ids: Vec<String>,
    liwc_ids: Vec<String>,
    pos_ids: Vec<String>,
    subtree_ids: Vec<String>,
    subtree_frequencies: Vec<usize>,
    extra_ids: Vec<String>,
    lexicon: Option<Lexicon>,
    dictionary: Option<CategoryDictionary>,
}

/// Frozen feature index.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct FeatureSpace {
    pub config: FeatureConfig,
    pub semantic_ids: Vec<String>,
    pub liwc_ids: Vec<String>,
    pub pos_ids: Vec<String>,
    pub subtree_ids: Vec<String>,
    /// Training frequency of each retained subtree, aligned with `subtree_ids`.
    pub subtree_frequencies: Vec<usize>,
    pub extra_ids: Vec<String>,
    lexicon: Option<Lexicon>,
    dictionary: Option<CategoryDictionary>,
    /// Semantic slot for each lexicon entry.
    entry_slots: Vec<usize>,
    has_diff_slot: usize,
    has_int_slot: usize,
    subtree_index: HashMap<String, usize>,
}

impl PartialEq for FeatureSpace {
    fn eq(&self, other: &FeatureSpace) -> bool {
        self.ids() == other.ids()
            && self.config == other.config
            && self.subtree_frequencies == other.subtree_frequencies
            && self.lexicon == other.lexicon
            && self.dictionary == other.dictionary
    }
}

impl TryFrom<SpaceRepr> for FeatureSpace {
    type Error = FeatureError;

    fn try_from(r: SpaceRepr) -> Result<FeatureSpace, FeatureError> {
        if r.format != SPACE_FORMAT || r.version != SPACE_VERSION {
            return Err(FeatureError::UnsupportedFormat {
                format: r.format,
                version: r.version,
            });
        }
        let subtree_frequencies = if r.subtree_frequencies.len() == r.subtree_ids.len() {
            r.subtree_frequencies
        } else {
            vec![0; r.subtree_ids.len()]
        };
        FeatureSpace::assemble(
            r.config,
            r.semantic_ids,
            r.liwc_ids,
            r.pos_ids,
            r.subtree_ids,
            subtree_frequencies,
            r.extra_ids,
            r.lexicon,
            r.dictionary,
        )
    }
}

impl From<FeatureSpace> for SpaceRepr {
    fn from(s: FeatureSpace) -> SpaceRepr {
        SpaceRepr {
            format: SPACE_FORMAT.to_string(),
            version: SPACE_VERSION,
            config: s.config,
            semantic_ids: s.semantic_ids,
            liwc_ids: s.liwc_ids,
            pos_ids: s.pos_ids,
            subtree_ids: s.subtree_ids,
            subtree_frequencies: s.subtree_frequencies,
            extra_ids: s.extra_ids,
            lexicon: s.lexicon,
            dictionary: s.dictionary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub doc_id: String,
    pub label: Option<IcBand>,
    pub values: Vec<f64>,
}

/// Fits the subtree vocabulary on `corpus`; all other blocks are fixed by
/// the resources and the tag registry.
pub fn fit_feature_space(
    corpus: &[ParsedDocument],
    config: &FeatureConfig,
    resources: &Resources,
) -> Result<FeatureSpace, FeatureError> {
    if corpus.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    if config.max_edges == 0 {
        return Err(FeatureError::InvalidMaxEdges);
    }
    let fam = config.families;
    let (semantic_ids, lexicon) = if fam.vocabulary {
        (resources.lexicon.feature_ids(), Some(resources.lexicon.clone()))
    } else {
        (Vec::new(), None)
    };
    let (liwc_ids, dictionary) = if fam.liwc {
        let dict = resources.dictionary.clone().ok_or(FeatureError::MissingDictionary)?;
        (dict.names().iter().map(|n| format!("{LIWC_PREFIX}{n}")).collect(), Some(dict))
    } else {
        (Vec::new(), None)
    };
    let pos_ids = if fam.pos {
        PENN_TAGS.iter().map(|t| format!("{POS_PREFIX}{t}")).collect()
    } else {
        Vec::new()
    };
    let (subtree_ids, subtree_frequencies) = if fam.subtrees {
        let freqs = subtree_frequencies(corpus, config.max_edges, config.frequency_count);
        freqs
            .into_iter()
            .filter(|&(_, f)| f >= config.min_freq)
            .map(|(k, f)| (format!("{TREE_PREFIX}{k}"), f))
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    let mut extra_ids = Vec::new();
    if fam.sentiment {
        extra_ids.push(SENTIMENT.to_string());
    }
    if fam.word_count {
        extra_ids.push(WORD_COUNT.to_string());
    }
    FeatureSpace::assemble(
        config.clone(),
        semantic_ids,
        liwc_ids,
        pos_ids,
        subtree_ids,
        subtree_frequencies,
        extra_ids,
        lexicon,
        dictionary,
    )
}

/// Corpus frequency of every label path, keyed by canonical key.
pub fn subtree_frequencies(
    corpus: &[ParsedDocument],
    max_edges: usize,
    counting: FrequencyCount,
) -> BTreeMap<String, usize> {
    corpus
        .par_iter()
        .map(|doc| syntax::path_key_counts(doc, max_edges).0)
        .fold(BTreeMap::new, |mut acc: BTreeMap<String, usize>, counts| {
            for (k, c) in counts {
                let add = match counting {
                    FrequencyCount::Occurrences => c,
                    FrequencyCount::Documents => 1,
                };
                *acc.entry(k).or_insert(0) += add;
            }
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            a
        })
}

impl FeatureSpace {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        config: FeatureConfig,
        semantic_ids: Vec<String>,
        liwc_ids: Vec<String>,
        pos_ids: Vec<String>,
        subtree_ids: Vec<String>,
        subtree_frequencies: Vec<usize>,
        extra_ids: Vec<String>,
        lexicon: Option<Lexicon>,
        dictionary: Option<CategoryDictionary>,
    ) -> Result<FeatureSpace, FeatureError> {
        let mut seen = BTreeSet::new();
        for id in semantic_ids
            .iter()
            .chain(&liwc_ids)
            .chain(&pos_ids)
            .chain(&subtree_ids)
            .chain(&extra_ids)
        {
            if !seen.insert(id.as_str()) {
                return Err(FeatureError::DuplicateId(id.clone()));
            }
        }
        let slot_of: HashMap<&str, usize> = semantic_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let slot = |id: &str| {
            slot_of
                .get(id)
                .copied()
                .ok_or_else(|| FeatureError::Inconsistent(format!("lexicon id {id:?} has no slot")))
        };
        let (entry_slots, has_diff_slot, has_int_slot) = match &lexicon {
            Some(lex) => (
                lex.entries()
                    .iter()
                    .map(|e| slot(&e.feature_id))
                    .collect::<Result<Vec<_>, _>>()?,
                slot(HAS_DIFF)?,
                slot(HAS_INT)?,
            ),
            None => (Vec::new(), 0, 0),
        };
        let subtree_index = subtree_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.trim_start_matches(TREE_PREFIX).to_string(), i))
            .collect();
        Ok(FeatureSpace {
            config,
            semantic_ids,
            liwc_ids,
            pos_ids,
            subtree_ids,
            subtree_frequencies,
            extra_ids,
            lexicon,
            dictionary,
            entry_slots,
            has_diff_slot,
            has_int_slot,
            subtree_index,
        })
    }

    pub fn dimension(&self) -> usize {
        self.semantic_ids.len()
            + self.liwc_ids.len()
            + self.pos_ids.len()
            + self.subtree_ids.len()
            + self.extra_ids.len()
    }

    /// All ids in vector order.
    pub fn ids(&self) -> Vec<String> {
        self.semantic_ids
            .iter()
            .chain(&self.liwc_ids)
            .chain(&self.pos_ids)
            .chain(&self.subtree_ids)
            .chain(&self.extra_ids)
            .cloned()
            .collect()
    }

    /// Slot ranges of the five blocks, in vector order.
    pub fn blocks(&self) -> [(&'static str, Range<usize>); 5] {
        let lens = [
            self.semantic_ids.len(),
            self.liwc_ids.len(),
            self.pos_ids.len(),
            self.subtree_ids.len(),
            self.extra_ids.len(),
        ];
        let names = ["semantic", "liwc", "pos", "subtree", "extra"];
        let mut start = 0;
        let mut out: [(&'static str, Range<usize>); 5] = Default::default();
        for i in 0..5 {
            out[i] = (names[i], start..start + lens[i]);
            start += lens[i];
        }
        out
    }

    pub fn lexicon(&self) -> Option<&Lexicon> {
        self.lexicon.as_ref()
    }

    /// Maps a document into this space. Missing `sentiment` metadata reads
    /// as 0 with a warning.
    pub fn vectorize(&self, doc: &ParsedDocument) -> FeatureVector {
        let mut values = Vec::with_capacity(self.dimension());
        if let Some(lex) = &self.lexicon {
            let mut block = vec![0.0; self.semantic_ids.len()];
            let mut has_diff = false;
            let mut has_int = false;
            for ((entry, &slot), hit) in lex.entries().iter().zip(&self.entry_slots).zip(lex.presence(doc)) {
                if hit {
                    block[slot] = 1.0;
                    match entry.role {
                        Role::Differentiation => has_diff = true,
                        Role::Integration => has_int = true,
                    }
                }
            }
            block[self.has_diff_slot] = has_diff as u8 as f64;
            block[self.has_int_slot] = has_int as u8 as f64;
            values.extend(block);
        }
        if let Some(dict) = &self.dictionary {
            values.extend(dict.presence(doc).into_iter().map(|h| h as u8 as f64));
        }
        if !self.pos_ids.is_empty() {
            values.extend_from_slice(syntax::pos_distribution(doc).fractions());
        }
        if !self.subtree_ids.is_empty() {
            let mut block = vec![0.0; self.subtree_ids.len()];
            let (counts, total) = syntax::path_key_counts(doc, self.config.max_edges);
            for (key, count) in counts {
                if let Some(&slot) = self.subtree_index.get(&key) {
                    block[slot] = match self.config.subtree_mode {
                        SubtreeMode::Binary => 1.0,
                        SubtreeMode::Normalized => count as f64 / total as f64,
                    };
                }
            }
            values.extend(block);
        }
        for id in &self.extra_ids {
            let v = match id.as_str() {
                WORD_COUNT => doc.word_count() as f64,
                SENTIMENT => doc.meta_f64(SENTIMENT).unwrap_or_else(|| {
                    log::warn!("document {}: no sentiment metadata, using 0", doc.id);
                    0.0
                }),
                _ => 0.0,
            };
            values.push(v);
        }
        debug_assert_eq!(values.len(), self.dimension());
        FeatureVector {
            doc_id: doc.id.clone(),
            label: doc.label,
            values,
        }
    }

    /// Vectorizes in parallel, preserving input order.
    pub fn vectorize_all(&self, docs: &[ParsedDocument]) -> Vec<FeatureVector> {
        docs.par_iter().map(|d| self.vectorize(d)).collect()
    }

    pub fn to_json(&self) -> Result<String, FeatureError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FeatureSpace, FeatureError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Content fingerprint used to tie models to the space they were trained in.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("feature space serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }

    /// Frozen subtree vocabulary: `key<TAB>training frequency`, sorted by key.
    pub fn write_subtree_vocabulary<W: io::Write>(&self, mut out: W) -> io::Result<()> {
        for (id, freq) in self.subtree_ids.iter().zip(&self.subtree_frequencies) {
            writeln!(out, "{}\t{}", id.trim_start_matches(TREE_PREFIX), freq)?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes vectors as CSV with a `doc_id,label,<feature ids>` header.
pub fn write_matrix<W: io::Write>(mut out: W, space: &FeatureSpace, vectors: &[FeatureVector]) -> io::Result<()> {
    let mut header = vec!["doc_id".to_string(), "label".to_string()];
    header.extend(space.ids().iter().map(|id| csv_field(id)));
    writeln!(out, "{}", header.join(","))?;
    for v in vectors {
        write!(out, "{},{}", csv_field(&v.doc_id), v.label.map(|l| l.to_string()).unwrap_or_default())?;
        for x in &v.values {
            write!(out, ",{x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
