//! Shared inputs for the benchmarks in `benches/`.

use icscore::features::{fit_feature_space, FeatureConfig, FeatureSet, FeatureSpace, Resources};
use icscore::synth::CorpusGenerator;
use icscore::{Lexicon, ParsedDocument};

pub fn labeled(n: usize) -> Vec<ParsedDocument> {
    CorpusGenerator::new(17).corpus(n)
}

pub fn unlabeled(n: usize) -> Vec<ParsedDocument> {
    CorpusGenerator::new(23).unlabeled_corpus(n, &["politics", "science", "gaming", "news"])
}

pub fn resources() -> Resources {
    Resources {
        lexicon: Lexicon::sample(),
        dictionary: None,
    }
}

pub fn space(corpus: &[ParsedDocument]) -> FeatureSpace {
    let config = FeatureConfig::with_families(FeatureSet::VPosTags.families());
    fit_feature_space(corpus, &config, &resources()).expect("synthetic corpus fits")
}

pub fn labels(corpus: &[ParsedDocument]) -> Vec<u8> {
    corpus.iter().map(|d| d.label.expect("labeled corpus").value()).collect()
}
