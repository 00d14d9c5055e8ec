use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::{parse_conllu_str, ConlluError, ParsedDocument};

#[derive(Debug, Error)]
pub enum InputError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("record {id}: {source}")]
    Conllu { id: String, source: ConlluError },
    #[error("record {0} has neither inline conllu nor text_ref")]
    NoText(String),
    #[error("record {id}: cannot read {path}: {source}")]
    TextRef {
        id: String,
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One line of a corpus JSONL file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub id: String,
    #[serde(default)]
    pub community: Option<String>,
    #[serde(default)]
    pub kind: Option<String>,
    /// Inline CoNLL-U text.
    #[serde(default)]
    pub conllu: Option<String>,
    /// Path to a CoNLL-U file, relative to the JSONL file. A `#doc` suffix
    /// selects one document by id.
    #[serde(default)]
    pub text_ref: Option<String>,
    #[serde(default)]
    pub community_score: Option<i64>,
    #[serde(default)]
    pub sentiment: Option<f64>,
}

/// All sentences of the parsed text become one document carrying the
/// record's id and metadata.
pub fn document_from_record(rec: &InputRecord, base_dir: &Path) -> Result<ParsedDocument, InputError> {
    let conllu_err = |source| InputError::Conllu {
        id: rec.id.clone(),
        source,
    };
    let docs = match (&rec.conllu, &rec.text_ref) {
        (Some(text), _) => parse_conllu_str(text).map_err(conllu_err)?,
        (None, Some(r)) => {
            let (file, fragment) = match r.split_once('#') {
                Some((f, frag)) => (f, Some(frag)),
                None => (r.as_str(), None),
            };
            let path = base_dir.join(file);
            let text = fs::read_to_string(&path).map_err(|source| InputError::TextRef {
                id: rec.id.clone(),
                path: path.clone(),
                source,
            })?;
            let mut docs = parse_conllu_str(&text).map_err(conllu_err)?;
            if let Some(frag) = fragment {
                docs.retain(|d| d.id == frag);
            }
            docs
        }
        (None, None) => return Err(InputError::NoText(rec.id.clone())),
    };
    let mut doc = ParsedDocument::new(rec.id.clone());
    for d in docs {
        if doc.label.is_none() {
            doc.label = d.label;
        }
        for (k, v) in d.meta {
            doc.meta.entry(k).or_insert(v);
        }
        doc.sentences.extend(d.sentences);
    }
    if let Some(c) = &rec.community {
        doc.meta.insert("community".into(), c.clone());
    }
    if let Some(k) = &rec.kind {
        doc.meta.insert("kind".into(), k.clone());
    }
    if let Some(s) = rec.community_score {
        doc.meta.insert("community_score".into(), s.to_string());
    }
    if let Some(s) = rec.sentiment {
        doc.meta.insert("sentiment".into(), s.to_string());
    }
    Ok(doc)
}

/// Iterates documents from a JSONL corpus, one per non-blank line.
pub struct JsonlReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    base_dir: PathBuf,
}

impl<R: BufRead> JsonlReader<R> {
    pub fn new(reader: R, base_dir: impl Into<PathBuf>) -> JsonlReader<R> {
        JsonlReader {
            lines: reader.lines(),
            line: 0,
            base_dir: base_dir.into(),
        }
    }
}

impl<R: BufRead> Iterator for JsonlReader<R> {
    type Item = Result<ParsedDocument, InputError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line += 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: InputRecord = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(source) => return Some(Err(InputError::Json { line: self.line, source })),
            };
            return Some(document_from_record(&rec, &self.base_dir));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::to_conllu_string;
    use crate::synth::the_cat_sleeps;

    #[test]
    fn inline_and_referenced() {
        let dir = tempfile::tempdir().unwrap();
        let text = to_conllu_string(&[the_cat_sleeps()]);
        fs::write(dir.path().join("cat.conllu"), &text).unwrap();
        let inline = serde_json::json!({"id": "a", "community": "r/x", "kind": "post", "conllu": text, "community_score": 12});
        let by_ref = serde_json::json!({"id": "b", "text_ref": "cat.conllu#the-cat-sleeps"});
        let missing = serde_json::json!({"id": "c"});
        let jsonl = format!("{inline}\n\n{by_ref}\n{missing}\nnot json\n");
        let out: Vec<_> = JsonlReader::new(jsonl.as_bytes(), dir.path()).collect();
        assert_eq!(out.len(), 4);
        let a = out[0].as_ref().unwrap();
        assert_eq!(a.id, "a");
        assert_eq!(a.word_count(), 3);
        assert_eq!(a.meta["community"], "r/x");
        assert_eq!(a.meta_f64("community_score"), Some(12.0));
        let b = out[1].as_ref().unwrap();
        assert_eq!(b.id, "b");
        assert_eq!(b.sentences, a.sentences);
        assert!(matches!(out[2], Err(InputError::NoText(_))));
        assert!(matches!(out[3], Err(InputError::Json { line: 5, .. })));
    }
}
