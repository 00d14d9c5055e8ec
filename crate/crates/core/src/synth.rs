//! Deterministic synthetic documents for fixtures, benchmarks and tests.
//!
//! Nothing here models real language. The generators produce structurally
//! valid parses whose keyword density and tree depth rise with the assigned
//! IC band, which is enough signal for learnability and directional checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conllu::{IcBand, ParsedDocument, Sentence, Token};

const FILLER_LEMMAS: &[&str] = &[
    "people", "think", "world", "good", "make", "time", "thing", "life", "see", "friend",
    "work", "feel", "city", "day", "book", "want", "help", "night", "write", "old", "new",
    "answer", "question", "history", "science", "idea", "family", "always", "never", "just",
];
const FILLER_TAGS: &[&str] = &[
    "NN", "VBP", "NN", "JJ", "VB", "NN", "NN", "NN", "VB", "NN", "NN", "VBP", "NN", "NN", "NN",
    "VBP", "VB", "NN", "VB", "JJ", "JJ", "NN", "NN", "NN", "NN", "NN", "NN", "RB", "RB", "RB",
];
const DIF_KEYWORDS: &[&str] = &["however", "but", "although", "perhaps", "rather", "while", "yet"];
const INT_KEYWORDS: &[&str] = &["balance", "compromise", "reconcile", "weigh", "integrate"];
const DEPRELS: &[&str] = &["nsubj", "dobj", "det", "amod", "prep", "pobj", "advmod", "conj", "cc", "mark", "advcl", "ccomp"];

/// Small builder for hand-made documents.
pub struct DocBuilder {
    doc: ParsedDocument,
}

impl DocBuilder {
    pub fn new(id: &str) -> DocBuilder {
        DocBuilder {
            doc: ParsedDocument::new(id),
        }
    }

    pub fn label(mut self, band: u8) -> DocBuilder {
        self.doc.label = Some(IcBand::new(band).expect("band in 1..=7"));
        self
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> DocBuilder {
        self.doc.meta.insert(key.to_string(), value.to_string());
        self
    }

    /// Adds a sentence from `(lemma, xpos, head, deprel)` rows; the form
    /// equals the lemma.
    pub fn sentence(mut self, rows: &[(&str, &str, usize, &str)]) -> DocBuilder {
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, &(lemma, xpos, head, deprel))| token(i + 1, lemma, xpos, head, deprel))
            .collect();
        self.doc.sentences.push(Sentence { tokens });
        self
    }

    /// Adds a sentence where token 1 is the root and every later token
    /// depends on its predecessor with label `dep`.
    pub fn chain_sentence(self, words: &[(&str, &str)]) -> DocBuilder {
        let rows: Vec<(&str, &str, usize, &str)> = words
            .iter()
            .enumerate()
            .map(|(i, &(lemma, xpos))| (lemma, xpos, i, if i == 0 { "ROOT" } else { "dep" }))
            .collect();
        self.sentence(&rows)
    }

    pub fn build(self) -> ParsedDocument {
        self.doc
    }
}

fn token(index: usize, lemma: &str, xpos: &str, head: usize, deprel: &str) -> Token {
    Token {
        index,
        form: lemma.to_string(),
        lemma: lemma.to_lowercase(),
        upos: "_".to_string(),
        xpos: xpos.to_string(),
        feats: "_".to_string(),
        head,
        deprel: deprel.to_string(),
        deps: "_".to_string(),
        misc: "_".to_string(),
    }
}

/// One chain-shaped sentence per lemma list, all tagged `NN`.
pub fn doc_from_lemmas(sentences: &[&[&str]]) -> ParsedDocument {
    let mut builder = DocBuilder::new("lemmas");
    for lemmas in sentences {
        let words: Vec<(&str, &str)> = lemmas.iter().map(|&l| (l, "NN")).collect();
        builder = builder.chain_sentence(&words);
    }
    builder.build()
}

/// "the cat sleeps": sleeps is the root, cat its nsubj, the the det of cat.
pub fn the_cat_sleeps() -> ParsedDocument {
    DocBuilder::new("the-cat-sleeps")
        .sentence(&[
            ("the", "DT", 2, "det"),
            ("cat", "NN", 3, "nsubj"),
            ("sleep", "VBZ", 0, "ROOT"),
        ])
        .build()
}

/// A uniformly shuffled random tree of `n` tokens whose non-root edges carry
/// labels drawn from `labels`.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, labels: &[&str]) -> Sentence {
    assert!(n >= 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut heads = vec![0usize; n];
    for k in 1..n {
        let parent = order[rng.gen_range(0..k)];
        heads[order[k]] = parent + 1;
    }
    let tokens = (0..n)
        .map(|i| {
            let deprel = if heads[i] == 0 {
                "ROOT"
            } else {
                labels[rng.gen_range(0..labels.len())]
            };
            let w = rng.gen_range(0..FILLER_LEMMAS.len());
            token(i + 1, FILLER_LEMMAS[w], FILLER_TAGS[w], heads[i], deprel)
        })
        .collect();
    Sentence { tokens }
}

/// Generator of labeled synthetic corpora.
pub struct CorpusGenerator {
    rng: ChaCha8Rng,
    next_id: usize,
}

impl CorpusGenerator {
    pub fn new(seed: u64) -> CorpusGenerator {
        CorpusGenerator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
        }
    }

    /// A document whose keyword content tracks `band`: band 1 carries no
    /// keywords, bands 2-3 carry differentiation keywords and bands 4+ add
    /// integration keywords.
    pub fn document(&mut self, band: u8) -> ParsedDocument {
        let id = format!("syn{:06}", self.next_id);
        self.next_id += 1;
        let n_dif = match band {
            1 => 0,
            2 => 1,
            _ => 2 + (band as usize - 3).min(2),
        };
        let n_int = band.saturating_sub(3) as usize;
        let n_sentences = self.rng.gen_range(1..=3) + (band as usize) / 3;
        let mut doc = ParsedDocument::new(id);
        doc.label = IcBand::new(band);
        for _ in 0..n_sentences {
            let n = self.rng.gen_range(4..=12);
            doc.sentences.push(random_tree(&mut self.rng, n, DEPRELS));
        }
        self.plant(&mut doc, DIF_KEYWORDS, n_dif, "RB");
        self.plant(&mut doc, INT_KEYWORDS, n_int, "VB");
        doc
    }

    /// A document with an explicit number of differentiation keywords and
    /// no label.
    pub fn document_with_keywords(&mut self, n_dif: usize) -> ParsedDocument {
        let mut doc = self.document(1);
        doc.label = None;
        self.plant(&mut doc, DIF_KEYWORDS, n_dif, "RB");
        doc
    }

    fn plant(&mut self, doc: &mut ParsedDocument, words: &[&str], count: usize, tag: &str) {
        let mut pool: Vec<&str> = words.to_vec();
        pool.shuffle(&mut self.rng);
        for &word in pool.iter().cycle().take(count) {
            let s = self.rng.gen_range(0..doc.sentences.len());
            let sentence = &mut doc.sentences[s];
            let t = self.rng.gen_range(0..sentence.tokens.len());
            let tok = &mut sentence.tokens[t];
            tok.form = word.to_string();
            tok.lemma = word.to_string();
            tok.xpos = tag.to_string();
        }
    }

    /// `n` documents with bands drawn from a skewed distribution resembling
    /// hand-coded training material (band 1-3 common, 6-7 rare).
    pub fn corpus(&mut self, n: usize) -> Vec<ParsedDocument> {
        const WEIGHTS: [u32; 7] = [30, 28, 20, 12, 6, 3, 1];
        let total: u32 = WEIGHTS.iter().sum();
        (0..n)
            .map(|_| {
                let mut draw = self.rng.gen_range(0..total);
                let mut band = 1u8;
                for (i, &w) in WEIGHTS.iter().enumerate() {
                    if draw < w {
                        band = i as u8 + 1;
                        break;
                    }
                    draw -= w;
                }
                self.document(band)
            })
            .collect()
    }

    /// Unlabeled documents carrying the metadata the analytics expect.
    pub fn unlabeled_corpus(&mut self, n: usize, communities: &[&str]) -> Vec<ParsedDocument> {
        (0..n)
            .map(|i| {
                let band = self.rng.gen_range(1..=4);
                let mut doc = self.document(band);
                doc.label = None;
                let community = communities[i % communities.len()];
                doc.meta.insert("community".into(), community.into());
                let kind = if self.rng.gen_bool(0.2) { "post" } else { "comment" };
                doc.meta.insert("kind".into(), kind.into());
                let score: i64 = self.rng.gen_range(-5..50) * (band as i64);
                doc.meta.insert("community_score".into(), score.to_string());
                let sentiment: f64 = self.rng.gen_range(-1.0..=1.0);
                doc.meta.insert("sentiment".into(), format!("{sentiment:.3}"));
                doc
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{parse_conllu_str, to_conllu_string};

    #[test]
    fn random_trees_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=12 {
            let s = random_tree(&mut rng, n, &["a", "b"]);
            let doc = ParsedDocument {
                id: "t".into(),
                sentences: vec![s],
                ..Default::default()
            };
            let text = to_conllu_string(&[doc.clone()]);
            assert_eq!(parse_conllu_str(&text).unwrap(), vec![doc]);
        }
    }

    #[test]
    fn generated_corpus_parses_back() {
        let docs = CorpusGenerator::new(1).corpus(30);
        let text = to_conllu_string(&docs);
        assert_eq!(parse_conllu_str(&text).unwrap(), docs);
    }

    #[test]
    fn generator_is_deterministic() {
        assert_eq!(CorpusGenerator::new(9).corpus(5), CorpusGenerator::new(9).corpus(5));
    }
}
