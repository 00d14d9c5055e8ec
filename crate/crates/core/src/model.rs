//! One interface over the boosted ensemble and the baselines, plus the
//! on-disk model envelope that binds a model to its feature space.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, BaselineError, MajorityModel, NaiveBayesModel, ScalarKind};
use crate::conllu::ParsedDocument;
use crate::features::{fit_feature_space, FeatureConfig, FeatureError, FeatureSet, FeatureSpace, Resources};
use crate::gbt::{self, argmax, GbtError, GbtModel, GbtParams};

pub const MODEL_FORMAT: &str = "icscore-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Gbt(#[from] GbtError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{0} documents but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("model expects {expected} features, feature space has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model was fitted against feature space {expected}, got {got}")]
    SpaceMismatch { expected: String, got: String },
    #[error("unsupported model file: format {format:?} version {version}")]
    UnsupportedFormat { format: String, version: u32 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Anything that maps a feature vector to a distribution over IC classes.
pub trait Classifier {
    /// Classes in ascending order; `predict_proba` is aligned with this.
    fn classes(&self) -> &[u8];

    fn n_features(&self) -> usize;

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError>;

    /// Most probable class, ties to the lowest id.
    fn predict(&self, x: &[f64]) -> Result<u8, ModelError> {
        let p = self.predict_proba(x)?;
        Ok(self.classes()[argmax(&p)])
    }
}

impl Classifier for GbtModel {
    fn classes(&self) -> &[u8] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        GbtModel::n_features(self)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        Ok(GbtModel::predict_proba(self, x)?)
    }

    fn predict(&self, x: &[f64]) -> Result<u8, ModelError> {
        Ok(GbtModel::predict(self, x)?)
    }
}

impl Classifier for NaiveBayesModel {
    fn classes(&self) -> &[u8] {
        &self.classes
    }

    fn n_features(&self) -> usize {
        NaiveBayesModel::n_features(self)
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        if x.len() != self.n_features() {
            return Err(GbtError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            }
            .into());
        }
        Ok(NaiveBayesModel::predict_proba(self, x))
    }
}

/// Which learner to fit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gbt,
    Majority,
    WordCount,
    Sentiment,
    NaiveBayes,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gbt => "gbt",
            ModelKind::Majority => "majority",
            ModelKind::WordCount => "word_count",
            ModelKind::Sentiment => "sentiment",
            ModelKind::NaiveBayes => "naive_bayes",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<ModelKind, String> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "gbt" => ModelKind::Gbt,
            "majority" => ModelKind::Majority,
            "word_count" | "wordcount" => ModelKind::WordCount,
            "sentiment" => ModelKind::Sentiment,
            "naive_bayes" | "nb" => ModelKind::NaiveBayes,
            other => return Err(format!("unknown model kind {other:?}")),
        })
    }
}

/// Everything needed to fit a model from parsed documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub features: FeatureConfig,
    pub params: GbtParams,
    pub seed: u64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            kind: ModelKind::Gbt,
            features: FeatureConfig::default(),
            params: GbtParams::default(),
            seed: 0,
        }
    }
}

impl ModelSpec {
    /// The scalar baselines only ever see their own input; majority sees nothing.
    pub fn effective_features(&self) -> FeatureConfig {
        let mut config = self.features.clone();
        match self.kind {
            ModelKind::Gbt | ModelKind::NaiveBayes => {}
            ModelKind::WordCount => config.families = FeatureSet::Wordcount.families(),
            ModelKind::Sentiment => config.families = FeatureSet::Sentiment.families(),
            ModelKind::Majority => {
                let mut f = FeatureSet::Wordcount.families();
                f.word_count = false;
                config.families = f;
            }
        }
        config
    }

    /// Fits a feature space on `corpus` and the model on top of it.
    /// `labels` may be aggregated bands and need not match document labels.
    pub fn fit(&self, corpus: &[ParsedDocument], labels: &[u8], resources: &Resources) -> Result<Fitted, ModelError> {
        if corpus.len() != labels.len() {
            return Err(ModelError::LengthMismatch(corpus.len(), labels.len()));
        }
        let space = fit_feature_space(corpus, &self.effective_features(), resources)?;
        let rows: Vec<Vec<f64>> = space.vectorize_all(corpus).into_iter().map(|v| v.values).collect();
        self.fit_vectors(space, &rows, labels)
    }

    /// Fits on rows already vectorized in `space`.
    pub fn fit_vectors(&self, space: FeatureSpace, rows: &[Vec<f64>], labels: &[u8]) -> Result<Fitted, ModelError> {
        let ids = space.ids();
        let mut round_losses = Vec::new();
        let model = match self.kind {
            ModelKind::Gbt => {
                let out = gbt::train(rows, labels, &ids, &self.params, self.seed)?;
                round_losses = out.round_losses;
                Model::Gbt(out.model)
            }
            ModelKind::Majority => Model::Majority(baselines::train_majority(labels)?),
            ModelKind::WordCount | ModelKind::Sentiment => {
                let scalar = if self.kind == ModelKind::WordCount {
                    ScalarKind::WordCount
                } else {
                    ScalarKind::Sentiment
                };
                let values: Vec<f64> = rows.iter().map(|r| r[0]).collect();
                let m = baselines::train_single_feature(&values, labels, scalar, &self.params, self.seed)?;
                if scalar == ScalarKind::WordCount {
                    Model::WordCount(m)
                } else {
                    Model::Sentiment(m)
                }
            }
            ModelKind::NaiveBayes => Model::NaiveBayes(baselines::train_naive_bayes(rows, labels)?),
        };
        Ok(Fitted {
            model: TrainedModel::new(space, model)?,
            round_losses,
        })
    }
}

pub struct Fitted {
    pub model: TrainedModel,
    /// Per-round training log-loss; empty for the baselines.
    pub round_losses: Vec<f64>,
}

/// A fitted learner of any kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Gbt(GbtModel),
    Majority(MajorityModel),
    WordCount(GbtModel),
    Sentiment(GbtModel),
    NaiveBayes(NaiveBayesModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Gbt(_) => ModelKind::Gbt,
            Model::Majority(_) => ModelKind::Majority,
            Model::WordCount(_) => ModelKind::WordCount,
            Model::Sentiment(_) => ModelKind::Sentiment,
            Model::NaiveBayes(_) => ModelKind::NaiveBayes,
        }
    }

    pub fn as_gbt(&self) -> Option<&GbtModel> {
        match self {
            Model::Gbt(m) | Model::WordCount(m) | Model::Sentiment(m) => Some(m),
            _ => None,
        }
    }

    fn as_classifier(&self) -> Option<&dyn Classifier> {
        match self {
            Model::Gbt(m) | Model::WordCount(m) | Model::Sentiment(m) => Some(m),
            Model::NaiveBayes(m) => Some(m),
            Model::Majority(_) => None,
        }
    }
}

impl Classifier for Model {
    fn classes(&self) -> &[u8] {
        match self {
            Model::Majority(m) => &m.classes,
            other => other.as_classifier().unwrap().classes(),
        }
    }

    fn n_features(&self) -> usize {
        self.as_classifier().map_or(0, |c| c.n_features())
    }

    fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::Majority(m) => Ok(m.predict_proba()),
            other => other.as_classifier().unwrap().predict_proba(x),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<u8, ModelError> {
        match self {
            Model::Majority(m) => Ok(m.class),
            other => other.as_classifier().unwrap().predict(x),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    feature_space_ref: String,
    model: Model,
    feature_space: FeatureSpace,
}

/// A model together with the feature space its inputs live in.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub space: FeatureSpace,
    pub model: Model,
}

impl TrainedModel {
    pub fn new(space: FeatureSpace, mut model: Model) -> Result<TrainedModel, ModelError> {
        let expected = model.n_features();
        if !matches!(model, Model::Majority(_)) && expected != space.dimension() {
            return Err(ModelError::DimensionMismatch {
                expected,
                got: space.dimension(),
            });
        }
        let fp = space.fingerprint();
        match &mut model {
            Model::Gbt(m) | Model::WordCount(m) | Model::Sentiment(m) => m.feature_space_ref = fp,
            _ => {}
        }
        Ok(TrainedModel { space, model })
    }

    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn classes(&self) -> &[u8] {
        self.model.classes()
    }

    pub fn predict_proba_doc(&self, doc: &ParsedDocument) -> Result<Vec<f64>, ModelError> {
        self.model.predict_proba(&self.space.vectorize(doc).values)
    }

    pub fn predict_doc(&self, doc: &ParsedDocument) -> Result<u8, ModelError> {
        self.model.predict(&self.space.vectorize(doc).values)
    }

    /// Serializes model and space into one self-contained JSON document.
    pub fn to_json(&self) -> Result<String, ModelError> {
        let env = Envelope {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            feature_space_ref: self.space.fingerprint(),
            model: self.model.clone(),
            feature_space: self.space.clone(),
        };
        Ok(serde_json::to_string_pretty(&env)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, ModelError> {
        let env: Envelope = serde_json::from_str(text)?;
        if env.format != MODEL_FORMAT || env.version != MODEL_VERSION {
            return Err(ModelError::UnsupportedFormat {
                format: env.format,
                version: env.version,
            });
        }
        let got = env.feature_space.fingerprint();
        if got != env.feature_space_ref {
            return Err(ModelError::SpaceMismatch {
                expected: env.feature_space_ref,
                got,
            });
        }
        TrainedModel::new(env.feature_space, env.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::CorpusGenerator;

    fn corpus() -> (Vec<ParsedDocument>, Vec<u8>) {
        let docs = CorpusGenerator::new(3).corpus(40);
        let labels = docs.iter().map(|d| d.label.unwrap().value()).collect();
        (docs, labels)
    }

    fn quick(kind: ModelKind) -> ModelSpec {
        ModelSpec {
            kind,
            params: GbtParams { n_rounds: 10, max_depth: 3, ..GbtParams::default() },
            ..ModelSpec::default()
        }
    }

    #[test]
    fn every_kind_round_trips() {
        let (docs, labels) = corpus();
        let res = Resources::default();
        for kind in [ModelKind::Gbt, ModelKind::Majority, ModelKind::WordCount, ModelKind::NaiveBayes] {
            let fitted = quick(kind.clone()).fit(&docs, &labels, &res).unwrap();
            let json = fitted.model.to_json().unwrap();
            let back = TrainedModel::from_json(&json).unwrap();
            assert_eq!(back, fitted.model);
            assert_eq!(back.kind(), kind);
            for d in &docs[..5] {
                assert_eq!(back.predict_doc(d).unwrap(), fitted.model.predict_doc(d).unwrap());
                let p = back.predict_proba_doc(d).unwrap();
                assert_eq!(p.len(), back.classes().len());
            }
        }
    }

    #[test]
    fn scalar_baselines_see_one_feature() {
        let spec = quick(ModelKind::WordCount);
        assert_eq!(spec.effective_features().families, FeatureSet::Wordcount.families());
        let (docs, labels) = corpus();
        let fitted = spec.fit(&docs, &labels, &Resources::default()).unwrap();
        assert_eq!(fitted.model.space.ids(), ["word_count"]);
    }

    #[test]
    fn tampered_space_is_rejected() {
        let (docs, labels) = corpus();
        let fitted = quick(ModelKind::Gbt).fit(&docs, &labels, &Resources::default()).unwrap();
        let json = fitted.model.to_json().unwrap();
        let mut value: serde_json::Value = serde_json::from_str(&json).unwrap();
        value["feature_space_ref"] = "0000000000000000".into();
        let err = TrainedModel::from_json(&value.to_string()).unwrap_err();
        assert!(matches!(err, ModelError::SpaceMismatch { .. }));
        value["format"] = "other".into();
        assert!(matches!(
            TrainedModel::from_json(&value.to_string()),
            Err(ModelError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn kind_names_parse() {
        for kind in [ModelKind::Gbt, ModelKind::Majority, ModelKind::WordCount, ModelKind::Sentiment, ModelKind::NaiveBayes] {
            assert_eq!(kind.name().parse::<ModelKind>().unwrap(), kind);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
