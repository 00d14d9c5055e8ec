//! Integrative complexity (IC) scoring.
//!
//! Texts arrive as dependency-parsed CoNLL-U documents. They are turned into
//! fixed-width vectors made of keyword-presence flags, category flags,
//! part-of-speech proportions and dependency label-path features. A
//! multiclass gradient-boosted tree ensemble assigns one of the seven IC
//! bands. Around that sit the comparison baselines, the evaluation harness
//! (weighted F1, MSE, confusion matrices, k-fold and heldout protocols,
//! coarser band aggregations) and corpus analytics for large scored
//! collections.

pub mod analytics;
pub mod baselines;
pub mod conllu;
pub mod evaluation;
pub mod features;
pub mod gbt;
pub mod lexicon;
pub mod model;
pub mod synth;
pub mod syntax;
pub mod tagset;

pub use conllu::{parse_conllu, write_conllu, ConlluError, ConlluReader, IcBand, ParsedDocument, Sentence, Token};
pub use evaluation::{AggregationScheme, EvalReport};
pub use features::{FeatureConfig, FeatureFamilies, FeatureSet, FeatureSpace, FeatureVector};
pub use gbt::{Attribution, GbtModel, GbtParams};
pub use lexicon::{CategoryDictionary, Lexicon, Role};
pub use model::{Classifier, Model, ModelKind, ModelSpec, TrainedModel};
pub use syntax::{SubtreeMode, SubtreePath};
