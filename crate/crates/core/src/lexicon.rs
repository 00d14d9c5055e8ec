//! Semantic features: keyword-lexicon presence and word-category presence.
//!
//! Both families are strictly binary. Keywords are matched against the
//! lemma sequence of each sentence (punctuation skipped, never crossing a
//! sentence boundary); categories are matched against both surface forms
//! and lemmas.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::ParsedDocument;

pub const HAS_DIFF: &str = "has_diff";
pub const HAS_INT: &str = "has_int";

const SAMPLE_LEXICON: &str = include_str!("../data/sample_lexicon.tsv");

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: duplicate feature id {id:?}")]
    DuplicateFeatureId { line: usize, id: String },
    #[error("line {line}: empty keyword phrase")]
    EmptyPhrase { line: usize },
    #[error("line {line}: unknown role {role:?} (expected DIF or INT)")]
    UnknownRole { line: usize, role: String },
    #[error("line {line}: expected `<role>\\t<feature_id>\\t<phrase>`")]
    Malformed { line: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("category dictionary must start with a `%` header block")]
    MissingHeader,
    #[error("line {line}: duplicate category {what:?}")]
    DuplicateCategory { line: usize, what: String },
    #[error("line {line}: unknown category id {id:?}")]
    UnknownCategory { line: usize, id: String },
    #[error("line {line}: malformed dictionary line")]
    Malformed { line: usize },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "DIF")]
    Differentiation,
    #[serde(rename = "INT")]
    Integration,
}

impl FromStr for Role {
    type Err = ();

    fn from_str(s: &str) -> Result<Role, ()> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DIF" | "DIFFERENTIATION" => Ok(Role::Differentiation),
            "INT" | "INTEGRATION" => Ok(Role::Integration),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Differentiation => "DIF",
            Role::Integration => "INT",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub phrase: Vec<String>,
    pub role: Role,
    pub feature_id: String,
}

#[derive(Serialize, Deserialize)]
struct LexiconRepr {
    entries: Vec<LexiconEntry>,
}

/// Differentiation/integration keyword lexicon.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "LexiconRepr", into = "LexiconRepr")]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    by_first_lemma: HashMap<String, Vec<usize>>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Lexicon) -> bool {
        self.entries == other.entries
    }
}

impl From<LexiconRepr> for Lexicon {
    fn from(repr: LexiconRepr) -> Lexicon {
        Lexicon::from_entries(repr.entries)
    }
}

impl From<Lexicon> for LexiconRepr {
    fn from(lex: Lexicon) -> LexiconRepr {
        LexiconRepr {
            entries: lex.entries,
        }
    }
}

impl Lexicon {
    fn from_entries(entries: Vec<LexiconEntry>) -> Lexicon {
        let mut by_first_lemma: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            if let Some(first) = entry.phrase.first() {
                by_first_lemma.entry(first.clone()).or_default().push(i);
            }
        }
        Lexicon {
            entries,
            by_first_lemma,
        }
    }

    /// Parses the tab-separated `<role>\t<feature_id>\t<lemma phrase>` format.
    /// Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        let mut entries = Vec::new();
        let mut seen: BTreeSet<String> = [HAS_DIFF, HAS_INT].iter().map(|s| s.to_string()).collect();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = raw.splitn(3, '\t');
            let (role, id, phrase) = match (cols.next(), cols.next(), cols.next()) {
                (Some(r), Some(id), phrase) => (r, id.trim(), phrase.unwrap_or("")),
                _ => return Err(LexiconError::Malformed { line }),
            };
            let role: Role = role.parse().map_err(|_| LexiconError::UnknownRole {
                line,
                role: role.to_string(),
            })?;
            if id.is_empty() {
                return Err(LexiconError::Malformed { line });
            }
            let phrase: Vec<String> = phrase.split_whitespace().map(str::to_lowercase).collect();
            if phrase.is_empty() {
                return Err(LexiconError::EmptyPhrase { line });
            }
            if !seen.insert(id.to_string()) {
                return Err(LexiconError::DuplicateFeatureId {
                    line,
                    id: id.to_string(),
                });
            }
            entries.push(LexiconEntry {
                phrase,
                role,
                feature_id: id.to_string(),
            });
        }
        Ok(Lexicon::from_entries(entries))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Lexicon::parse(&text)
    }

    /// The bundled sample lexicon of common differentiation and integration
    /// keywords.
    pub fn sample() -> Lexicon {
        Lexicon::parse(SAMPLE_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keyword feature ids followed by the two summary ids, in lexicographic order.
    pub fn feature_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.feature_id.clone()).collect();
        ids.push(HAS_DIFF.to_string());
        ids.push(HAS_INT.to_string());
        ids.sort();
        ids
    }

    /// Presence flag per entry, aligned with [`Lexicon::entries`].
    pub fn presence(&self, doc: &ParsedDocument) -> Vec<bool> {
        let mut hits = vec![false; self.entries.len()];
        for sentence in &doc.sentences {
            let lemmas: Vec<&str> = sentence
                .tokens
                .iter()
                .filter(|t| !t.is_punctuation())
                .map(|t| t.lemma.as_str())
                .collect();
            for start in 0..lemmas.len() {
                let Some(candidates) = self.by_first_lemma.get(lemmas[start]) else {
                    continue;
                };
                for &idx in candidates {
                    let phrase = &self.entries[idx].phrase;
                    if !hits[idx]
                        && lemmas.len() - start >= phrase.len()
                        && phrase
                            .iter()
                            .zip(&lemmas[start..])
                            .all(|(p, l)| p == l)
                    {
                        hits[idx] = true;
                    }
                }
            }
        }
        hits
    }
}

/// Binary keyword features plus the `has_diff` / `has_int` summaries.
pub fn semantic_features(doc: &ParsedDocument, lex: &Lexicon) -> BTreeMap<String, u8> {
    let hits = lex.presence(doc);
    let mut out = BTreeMap::new();
    let mut has_diff = 0;
    let mut has_int = 0;
    for (entry, &hit) in lex.entries.iter().zip(&hits) {
        out.insert(entry.feature_id.clone(), hit as u8);
        if hit {
            match entry.role {
                Role::Differentiation => has_diff = 1,
                Role::Integration => has_int = 1,
            }
        }
    }
    out.insert(HAS_DIFF.to_string(), has_diff);
    out.insert(HAS_INT.to_string(), has_int);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    /// Lowercase word patterns; a trailing `*` matches any continuation.
    pub members: BTreeSet<String>,
}

#[derive(Serialize, Deserialize)]
struct DictionaryRepr {
    categories: Vec<Category>,
}

/// Word-category dictionary in the LIWC interchange layout.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "DictionaryRepr", into = "DictionaryRepr")]
pub struct CategoryDictionary {
    categories: Vec<Category>,
    exact: HashMap<String, Vec<usize>>,
    prefixes: HashMap<String, Vec<usize>>,
}

impl PartialEq for CategoryDictionary {
    fn eq(&self, other: &CategoryDictionary) -> bool {
        self.categories == other.categories
    }
}

impl From<DictionaryRepr> for CategoryDictionary {
    fn from(repr: DictionaryRepr) -> CategoryDictionary {
        CategoryDictionary::from_categories(repr.categories)
    }
}

impl From<CategoryDictionary> for DictionaryRepr {
    fn from(dict: CategoryDictionary) -> DictionaryRepr {
        DictionaryRepr {
            categories: dict.categories,
        }
    }
}

impl CategoryDictionary {
    /// Builds a dictionary from categories whose names are assumed unique.
    pub fn from_categories(mut categories: Vec<Category>) -> CategoryDictionary {
        categories.sort_by(|a, b| a.name.cmp(&b.name));
        let mut exact: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, cat) in categories.iter().enumerate() {
            for pattern in &cat.members {
                match pattern.strip_suffix('*') {
                    Some(prefix) => prefixes.entry(prefix.to_string()).or_default().push(i),
                    None => exact.entry(pattern.clone()).or_default().push(i),
                }
            }
        }
        CategoryDictionary {
            categories,
            exact,
            prefixes,
        }
    }

    /// Parses the `%`-delimited layout:
    ///
    /// ```text
    /// %
    /// 1	future
    /// 2	posemo
    /// %
    /// will	1
    /// happi*	2
    /// gonna	1,2
    /// ```
    ///
    /// Category ids on word lines may be separated by tabs, spaces or commas.
    pub fn parse(text: &str) -> Result<CategoryDictionary, DictionaryError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "%")) => {}
            _ => return Err(DictionaryError::MissingHeader),
        }
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut names: BTreeSet<String> = BTreeSet::new();
        let mut categories: Vec<Category> = Vec::new();
        let mut header_closed = false;
        for (line, text) in lines.by_ref() {
            if text == "%" {
                header_closed = true;
                break;
            }
            let mut parts = text.split_whitespace();
            let (Some(id), Some(name), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(DictionaryError::Malformed { line });
            };
            if ids.contains_key(id) {
                return Err(DictionaryError::DuplicateCategory {
                    line,
                    what: id.to_string(),
                });
            }
            if !names.insert(name.to_string()) {
                return Err(DictionaryError::DuplicateCategory {
                    line,
                    what: name.to_string(),
                });
            }
            ids.insert(id.to_string(), categories.len());
            categories.push(Category {
                name: name.to_string(),
                members: BTreeSet::new(),
            });
        }
        if !header_closed {
            return Err(DictionaryError::MissingHeader);
        }
        for (line, text) in lines {
            let (word, rest) = text
                .split_once(['\t', ' '])
                .ok_or(DictionaryError::Malformed { line })?;
            let word = word.to_lowercase();
            let mut any = false;
            for id in rest.split(['\t', ' ', ',']).filter(|s| !s.is_empty()) {
                let &cat = ids.get(id).ok_or_else(|| DictionaryError::UnknownCategory {
                    line,
                    id: id.to_string(),
                })?;
                categories[cat].members.insert(word.clone());
                any = true;
            }
            if !any {
                return Err(DictionaryError::Malformed { line });
            }
        }
        Ok(CategoryDictionary::from_categories(categories))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<CategoryDictionary, DictionaryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DictionaryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        CategoryDictionary::parse(&text)
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    /// Category names in lexicographic order.
    pub fn names(&self) -> Vec<String> {
        self.categories.iter().map(|c| c.name.clone()).collect()
    }

    fn mark(&self, word: &str, hits: &mut [bool]) {
        if let Some(cats) = self.exact.get(word) {
            for &c in cats {
                hits[c] = true;
            }
        }
        if self.prefixes.is_empty() {
            return;
        }
        for (end, _) in word.char_indices().skip(1).chain(std::iter::once((word.len(), ' '))) {
            if let Some(cats) = self.prefixes.get(&word[..end]) {
                for &c in cats {
                    hits[c] = true;
                }
            }
        }
        // A bare `*` pattern matches every word.
        if let Some(cats) = self.prefixes.get("") {
            for &c in cats {
                hits[c] = true;
            }
        }
    }

    /// Presence flag per category, aligned with [`CategoryDictionary::categories`].
    pub fn presence(&self, doc: &ParsedDocument) -> Vec<bool> {
        let mut hits = vec![false; self.categories.len()];
        for token in doc.tokens() {
            self.mark(&token.lemma, &mut hits);
            let surface = token.form.to_lowercase();
            if surface != token.lemma {
                self.mark(&surface, &mut hits);
            }
        }
        hits
    }
}

pub fn liwc_features(doc: &ParsedDocument, dict: &CategoryDictionary) -> BTreeMap<String, u8> {
    dict.categories
        .iter()
        .zip(dict.presence(doc))
        .map(|(c, hit)| (c.name.clone(), hit as u8))
        .collect()
}
