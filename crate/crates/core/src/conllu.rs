//! CoNLL-U ingest.
//!
//! Documents are delimited by `# newdoc id = <id>` comments and sentences by
//! blank lines. Two further comment conventions are recognised inside a
//! document: `# ic = <n>` carries the gold IC band and `# meta.<key> = <value>`
//! carries free metadata (source, community, community_score, sentiment,
//! ...). Every other comment is ignored. Of the ten columns only ID, FORM,
//! LEMMA, XPOS, HEAD and DEPREL are interpreted; the remaining four are kept
//! verbatim so that a document can be written back out unchanged.
//!
//! Multiword-token ranges (`3-4`) and empty nodes (`5.1`) are skipped.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tagset;

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: malformed token line: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: head {head} is outside the sentence (1..={len})")]
    DanglingHead { line: usize, head: usize, len: usize },
    #[error("line {line}: head relation is not a tree")]
    CyclicTree { line: usize },
    #[error("line {line}: sentence has {roots} root tokens, expected exactly one")]
    RootCount { line: usize, roots: usize },
    #[error("line {line}: IC label {value:?} is not an integer in 1..=7")]
    BadLabel { line: usize, value: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ConlluError {
    /// 1-based line number the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConlluError::MalformedLine { line, .. }
            | ConlluError::DanglingHead { line, .. }
            | ConlluError::CyclicTree { line }
            | ConlluError::RootCount { line, .. }
            | ConlluError::BadLabel { line, .. } => Some(*line),
            ConlluError::Io(_) => None,
        }
    }
}

/// One of the seven integrative complexity bands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct IcBand(u8);

impl IcBand {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 7;

    pub fn new(value: u8) -> Option<IcBand> {
        (Self::MIN..=Self::MAX).contains(&value).then_some(IcBand(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = IcBand> {
        (Self::MIN..=Self::MAX).map(IcBand)
    }
}

impl TryFrom<u8> for IcBand {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        IcBand::new(value).ok_or_else(|| format!("IC band {value} outside 1..=7"))
    }
}

impl From<IcBand> for u8 {
    fn from(band: IcBand) -> u8 {
        band.0
    }
}

impl fmt::Display for IcBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position within the sentence.
    pub index: usize,
    pub form: String,
    /// Lowercased lemma; falls back to the lowercased form when the column is `_`.
    pub lemma: String,
    pub upos: String,
    pub xpos: String,
    pub feats: String,
    /// Index of the governing token, 0 for the root.
    pub head: usize,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// Position of the tag in the Penn registry; `None` is the OTHER bucket.
    pub fn tag_index(&self) -> Option<usize> {
        tagset::tag_index(&self.xpos)
    }

    pub fn is_punctuation(&self) -> bool {
        tagset::is_punctuation(&self.xpos, &self.upos)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Children of every token, indexed by 0-based token position. Entry
    /// lists preserve token order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut children = vec![Vec::new(); self.tokens.len()];
        for (pos, token) in self.tokens.iter().enumerate() {
            if token.head > 0 {
                children[token.head - 1].push(pos);
            }
        }
        children
    }

    /// 0-based position of the root token.
    pub fn root(&self) -> Option<usize> {
        self.tokens.iter().position(|t| t.head == 0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedDocument {
    pub id: String,
    pub sentences: Vec<Sentence>,
    pub label: Option<IcBand>,
    pub meta: BTreeMap<String, String>,
}

impl ParsedDocument {
    pub fn new(id: impl Into<String>) -> ParsedDocument {
        ParsedDocument {
            id: id.into(),
            ..ParsedDocument::default()
        }
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.sentences.iter().flat_map(|s| s.tokens.iter())
    }

    /// Parses a numeric metadata value, e.g. `sentiment` or `community_score`.
    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(|v| v.trim().parse().ok())
    }
}

/// Parses a whole stream, failing on the first structural error.
pub fn parse_conllu<R: BufRead>(reader: R) -> Result<Vec<ParsedDocument>, ConlluError> {
    ConlluReader::new(reader).collect()
}

/// Convenience wrapper over [`parse_conllu`] for in-memory text.
pub fn parse_conllu_str(text: &str) -> Result<Vec<ParsedDocument>, ConlluError> {
    parse_conllu(text.as_bytes())
}

/// Streaming document reader.
///
/// After an error the reader discards the rest of the offending document and
/// resumes at the next `# newdoc` line, so a long corpus can be processed
/// past isolated bad records.
pub struct ConlluReader<R> {
    lines: io::Lines<R>,
    line_no: usize,
    current: Option<ParsedDocument>,
    sentence: Vec<(usize, Token)>,
    next_implicit: usize,
    skipping: bool,
    done: bool,
}

impl<R: BufRead> ConlluReader<R> {
    pub fn new(reader: R) -> ConlluReader<R> {
        ConlluReader {
            lines: reader.lines(),
            line_no: 0,
            current: None,
            sentence: Vec::new(),
            next_implicit: 1,
            skipping: false,
            done: false,
        }
    }

    fn current_doc(&mut self) -> &mut ParsedDocument {
        if self.current.is_none() {
            let id = format!("doc{}", self.next_implicit);
            self.next_implicit += 1;
            self.current = Some(ParsedDocument::new(id));
        }
        self.current.as_mut().unwrap()
    }

    fn close_sentence(&mut self) -> Result<(), ConlluError> {
        if self.sentence.is_empty() {
            return Ok(());
        }
        let lines: Vec<(usize, Token)> = std::mem::take(&mut self.sentence);
        let sentence = validate_sentence(lines)?;
        self.current_doc().sentences.push(sentence);
        Ok(())
    }

    /// Handles one line; returns a finished document when `# newdoc` closes one.
    fn feed(&mut self, line: &str) -> Result<Option<ParsedDocument>, ConlluError> {
        let line = line.trim_end_matches(['\r', '\n']);
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(rest) = comment.strip_prefix("newdoc") {
                self.skipping = false;
                self.close_sentence()?;
                let finished = self.current.take();
                let id = rest
                    .trim()
                    .strip_prefix("id")
                    .and_then(|r| r.trim_start().strip_prefix('='))
                    .map(|id| id.trim().to_string())
                    .filter(|id| !id.is_empty());
                let id = id.unwrap_or_else(|| {
                    let id = format!("doc{}", self.next_implicit);
                    self.next_implicit += 1;
                    id
                });
                self.current = Some(ParsedDocument::new(id));
                return Ok(finished);
            }
            if self.skipping {
                return Ok(None);
            }
            if let Some((key, value)) = comment.split_once('=') {
                let key = key.trim();
                let value = value.trim();
                if key == "ic" {
                    let band = value
                        .parse::<u8>()
                        .ok()
                        .and_then(IcBand::new)
                        .ok_or_else(|| ConlluError::BadLabel {
                            line: self.line_no,
                            value: value.to_string(),
                        })?;
                    self.current_doc().label = Some(band);
                } else if let Some(meta_key) = key.strip_prefix("meta.") {
                    self.current_doc()
                        .meta
                        .insert(meta_key.to_string(), value.to_string());
                }
            }
            return Ok(None);
        }
        if self.skipping {
            return Ok(None);
        }
        if line.trim().is_empty() {
            self.close_sentence()?;
            return Ok(None);
        }
        if let Some(token) = parse_token_line(line, self.line_no)? {
            self.sentence.push((self.line_no, token));
        }
        Ok(None)
    }

    fn finish(&mut self) -> Result<Option<ParsedDocument>, ConlluError> {
        if !self.skipping {
            self.close_sentence()?;
        }
        Ok(self.current.take())
    }
}

impl<R: BufRead> Iterator for ConlluReader<R> {
    type Item = Result<ParsedDocument, ConlluError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.lines.next() {
                Some(Ok(line)) => {
                    self.line_no += 1;
                    match self.feed(&line) {
                        Ok(Some(doc)) => return Some(Ok(doc)),
                        Ok(None) => {}
                        Err(e) => {
                            self.sentence.clear();
                            self.current = None;
                            self.skipping = true;
                            return Some(Err(e));
                        }
                    }
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                None => {
                    self.done = true;
                    return self.finish().transpose();
                }
            }
        }
    }
}

fn malformed(line: usize, reason: impl Into<String>) -> ConlluError {
    ConlluError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

fn parse_token_line(line: &str, line_no: usize) -> Result<Option<Token>, ConlluError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 10 {
        return Err(malformed(
            line_no,
            format!("expected 10 tab-separated columns, found {}", cols.len()),
        ));
    }
    let id = cols[0];
    if id.contains('-') || id.contains('.') {
        return Ok(None);
    }
    let index: usize = id
        .parse()
        .map_err(|_| malformed(line_no, format!("bad ID {id:?}")))?;
    if index == 0 {
        return Err(malformed(line_no, "token IDs start at 1"));
    }
    let head: usize = cols[6]
        .parse()
        .map_err(|_| malformed(line_no, format!("bad HEAD {:?}", cols[6])))?;
    let form = cols[1].to_string();
    let lemma = if cols[2] == "_" && cols[1] != "_" {
        cols[1].to_lowercase()
    } else {
        cols[2].to_lowercase()
    };
    Ok(Some(Token {
        index,
        form,
        lemma,
        upos: cols[3].to_string(),
        xpos: cols[4].to_string(),
        feats: cols[5].to_string(),
        head,
        deprel: cols[7].to_string(),
        deps: cols[8].to_string(),
        misc: cols[9].to_string(),
    }))
}

fn validate_sentence(lines: Vec<(usize, Token)>) -> Result<Sentence, ConlluError> {
    let len = lines.len();
    for (pos, (line, token)) in lines.iter().enumerate() {
        if token.index != pos + 1 {
            return Err(malformed(
                *line,
                format!("token ID {} out of sequence, expected {}", token.index, pos + 1),
            ));
        }
        if token.head > len {
            return Err(ConlluError::DanglingHead {
                line: *line,
                head: token.head,
                len,
            });
        }
        if token.head == token.index {
            return Err(ConlluError::CyclicTree { line: *line });
        }
    }
    let roots: Vec<usize> = lines
        .iter()
        .filter(|(_, t)| t.head == 0)
        .map(|(line, _)| *line)
        .collect();
    if roots.len() > 1 {
        return Err(ConlluError::RootCount {
            line: roots[1],
            roots: roots.len(),
        });
    }
    // With every head in range, a token that cannot reach the root within
    // `len` steps sits on a cycle.
    for (line, token) in &lines {
        let mut head = token.head;
        let mut steps = 0;
        while head != 0 {
            steps += 1;
            if steps > len {
                return Err(ConlluError::CyclicTree { line: *line });
            }
            head = lines[head - 1].1.head;
        }
    }
    if roots.is_empty() {
        // Unreachable once the cycle check passed, kept for clarity of the error.
        return Err(ConlluError::RootCount {
            line: lines[0].0,
            roots: 0,
        });
    }
    Ok(Sentence {
        tokens: lines.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Serializes documents in the same comment conventions the reader accepts.
pub fn write_conllu<W: io::Write>(mut out: W, docs: &[ParsedDocument]) -> io::Result<()> {
    for doc in docs {
        writeln!(out, "# newdoc id = {}", doc.id)?;
        if let Some(label) = doc.label {
            writeln!(out, "# ic = {label}")?;
        }
        for (key, value) in &doc.meta {
            writeln!(out, "# meta.{key} = {value}")?;
        }
        for sentence in &doc.sentences {
            for t in &sentence.tokens {
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    t.index, t.form, t.lemma, t.upos, t.xpos, t.feats, t.head, t.deprel, t.deps, t.misc
                )?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn to_conllu_string(docs: &[ParsedDocument]) -> String {
    let mut buf = Vec::new();
    write_conllu(&mut buf, docs).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("documents hold UTF-8 strings")
}

#[cfg(test)]
mod tests {
    use super::*;

    const CAT: &str = "# newdoc id = d1\n\
# ic = 2\n\
# meta.community = pets\n\
1\tthe\tthe\tDET\tDT\t_\t2\tdet\t_\t_\n\
2\tcat\tcat\tNOUN\tNN\t_\t3\tnsubj\t_\t_\n\
3\tsleeps\tsleep\tVERB\tVBZ\t_\t0\tROOT\t_\t_\n\
\n";

    #[test]
    fn empty_stream_yields_nothing() {
        assert!(parse_conllu_str("").unwrap().is_empty());
    }

    #[test]
    fn parses_the_cat_sleeps() {
        let docs = parse_conllu_str(CAT).unwrap();
        assert_eq!(docs.len(), 1);
        let doc = &docs[0];
        assert_eq!(doc.id, "d1");
        assert_eq!(doc.label, IcBand::new(2));
        assert_eq!(doc.meta["community"], "pets");
        assert_eq!(doc.sentences.len(), 1);
        assert_eq!(doc.word_count(), 3);
        let lemmas: Vec<_> = doc.tokens().map(|t| t.lemma.as_str()).collect();
        assert_eq!(lemmas, ["the", "cat", "sleep"]);
        assert_eq!(doc.sentences[0].root(), Some(2));
    }

    #[test]
    fn dangling_head_reports_line() {
        let text = CAT.replace("2\tcat\tcat\tNOUN\tNN\t_\t3", "2\tcat\tcat\tNOUN\tNN\t_\t9");
        match parse_conllu_str(&text) {
            Err(ConlluError::DanglingHead { line, head, len }) => {
                assert_eq!((line, head, len), (5, 9, 3));
            }
            other => panic!("expected DanglingHead, got {other:?}"),
        }
    }

    #[test]
    fn cycle_is_rejected() {
        let text = "1\ta\ta\t_\tDT\t_\t2\tdet\t_\t_\n\
2\tb\tb\t_\tNN\t_\t1\tdep\t_\t_\n\
3\tc\tc\t_\tVB\t_\t0\tROOT\t_\t_\n\n";
        assert!(matches!(
            parse_conllu_str(text),
            Err(ConlluError::CyclicTree { line: 1 })
        ));
    }

    #[test]
    fn self_loop_and_two_roots_are_rejected() {
        let self_loop = "1\ta\ta\t_\tDT\t_\t1\tdet\t_\t_\n\n";
        assert!(matches!(
            parse_conllu_str(self_loop),
            Err(ConlluError::CyclicTree { line: 1 })
        ));
        let two_roots = "1\ta\ta\t_\tDT\t_\t0\tROOT\t_\t_\n2\tb\tb\t_\tNN\t_\t0\tROOT\t_\t_\n\n";
        assert!(matches!(
            parse_conllu_str(two_roots),
            Err(ConlluError::RootCount { line: 2, roots: 2 })
        ));
    }

    #[test]
    fn wrong_column_count_is_malformed() {
        let text = "1\ta\ta\tDT\t0\tROOT\n\n";
        assert!(matches!(
            parse_conllu_str(text),
            Err(ConlluError::MalformedLine { line: 1, .. })
        ));
    }

    #[test]
    fn bad_labels() {
        for bad in ["0", "8", "2.5", "high"] {
            let text = format!("# newdoc id = x\n# ic = {bad}\n");
            assert!(
                matches!(parse_conllu_str(&text), Err(ConlluError::BadLabel { line: 2, .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn ranges_and_empty_nodes_are_skipped() {
        let text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n\
1\tdo\tdo\tAUX\tVBP\t_\t0\tROOT\t_\t_\n\
2\tn't\tnot\tPART\tRB\t_\t1\tneg\t_\t_\n\
2.1\tx\tx\t_\t_\t_\t_\t_\t_\t_\n\n";
        let docs = parse_conllu_str(text).unwrap();
        assert_eq!(docs[0].word_count(), 2);
        assert_eq!(docs[0].id, "doc1");
    }

    #[test]
    fn empty_document_block_is_legal() {
        let text = "# newdoc id = a\n# newdoc id = b\n1\tx\tx\t_\tNN\t_\t0\tROOT\t_\t_\n";
        let docs = parse_conllu_str(text).unwrap();
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].word_count(), 0);
        assert_eq!(docs[1].word_count(), 1);
    }

    #[test]
    fn reader_resumes_after_error() {
        let text = "# newdoc id = bad\n1\ta\ta\t_\tDT\t_\t5\tdet\t_\t_\n\n\
# newdoc id = good\n1\tb\tb\t_\tNN\t_\t0\tROOT\t_\t_\n\n";
        let results: Vec<_> = ConlluReader::new(text.as_bytes()).collect();
        assert_eq!(results.len(), 2);
        assert!(results[0].is_err());
        assert_eq!(results[1].as_ref().unwrap().id, "good");
    }

    #[test]
    fn missing_lemma_falls_back_to_form() {
        let text = "1\tCats\t_\t_\tNNS\t_\t0\tROOT\t_\t_\n";
        let docs = parse_conllu_str(text).unwrap();
        assert_eq!(docs[0].sentences[0].tokens[0].lemma, "cats");
    }

    #[test]
    fn write_then_parse_round_trips() {
        let docs = parse_conllu_str(CAT).unwrap();
        let text = to_conllu_string(&docs);
        assert_eq!(parse_conllu_str(&text).unwrap(), docs);
    }
}
