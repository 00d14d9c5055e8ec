//! Run configuration read from TOML, with command-line overrides applied
//! on top.
//!
//! ```toml
//! seed = 0
//!
//! [features]
//! set = "v_postags"
//! subtree_mode = "binary"
//!
//! [model]
//! kind = "gbt"
//! n_rounds = 500
//!
//! [resources]
//! lexicon = "lexicon.tsv"
//! ```

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use icscore::analytics::{BinConfig, LogBase, Rounding, DEFAULT_CHUNK};
use icscore::features::{FeatureConfig, FeatureSet, FrequencyCount, Resources, DEFAULT_MIN_FREQ};
use icscore::syntax::{SubtreeMode, DEFAULT_MAX_EDGES};
use icscore::{AggregationScheme, CategoryDictionary, GbtParams, Lexicon, ModelKind, ModelSpec};
use serde::{Deserialize, Serialize};

use crate::usage;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub set: FeatureSet,
    pub subtree_mode: SubtreeMode,
    pub max_edges: usize,
    pub min_freq: usize,
    pub frequency_count: FrequencyCount,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            set: FeatureSet::VPosTags,
            subtree_mode: SubtreeMode::Binary,
            max_edges: DEFAULT_MAX_EDGES,
            min_freq: DEFAULT_MIN_FREQ,
            frequency_count: FrequencyCount::Occurrences,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub n_rounds: usize,
    pub max_depth: usize,
    pub subsample: f64,
    pub learning_rate: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let p = GbtParams::default();
        ModelSection {
            kind: ModelKind::Gbt,
            n_rounds: p.n_rounds,
            max_depth: p.max_depth,
            subsample: p.subsample,
            learning_rate: p.learning_rate,
            lambda: p.lambda,
            min_child_weight: p.min_child_weight,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> GbtParams {
        GbtParams {
            n_rounds: self.n_rounds,
            max_depth: self.max_depth,
            subsample: self.subsample,
            learning_rate: self.learning_rate,
            lambda: self.lambda,
            min_child_weight: self.min_child_weight,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourceSection {
    /// Keyword lexicon; the bundled sample list when absent.
    pub lexicon: Option<PathBuf>,
    /// Category dictionary, needed by feature sets that include categories.
    pub dictionary: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub scheme: AggregationScheme,
    pub folds: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            scheme: AggregationScheme::Seven,
            folds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyticsSection {
    pub log_base: LogBase,
    pub rounding: Rounding,
    pub chunk_size: usize,
}

impl Default for AnalyticsSection {
    fn default() -> Self {
        AnalyticsSection {
            log_base: LogBase::E,
            rounding: Rounding::HalfUp,
            chunk_size: DEFAULT_CHUNK,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the thread pool decide.
    pub workers: usize,
    pub features: FeatureSection,
    pub model: ModelSection,
    pub resources: ResourceSection,
    pub evaluation: EvaluationSection,
    pub analytics: AnalyticsSection,
}

impl RunConfig {
    /// Reads a TOML file. Relative resource paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.resources.lexicon, &mut config.resources.dictionary].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            families: self.features.set.families(),
            subtree_mode: self.features.subtree_mode,
            max_edges: self.features.max_edges,
            min_freq: self.features.min_freq,
            frequency_count: self.features.frequency_count,
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.model.kind.clone(),
            features: self.feature_config(),
            params: self.model.params(),
            seed: self.seed,
        }
    }

    pub fn bin_config(&self) -> BinConfig {
        BinConfig {
            base: self.analytics.log_base,
            rounding: self.analytics.rounding,
        }
    }

    pub fn resources(&self) -> Result<Resources> {
        let lexicon = match &self.resources.lexicon {
            Some(p) => {
                if !p.exists() {
                    return Err(usage(format!("lexicon file {} does not exist", p.display())));
                }
                Lexicon::load(p).with_context(|| format!("loading lexicon {}", p.display()))?
            }
            None => Lexicon::sample(),
        };
        let dictionary = match &self.resources.dictionary {
            Some(p) => {
                if !p.exists() {
                    return Err(usage(format!("dictionary file {} does not exist", p.display())));
                }
                Some(CategoryDictionary::load(p).with_context(|| format!("loading dictionary {}", p.display()))?)
            }
            None => None,
        };
        if self.feature_config().families.liwc && dictionary.is_none() {
            return Err(usage(format!(
                "feature set {} needs a category dictionary ([resources] dictionary or --dictionary)",
                self.features.set
            )));
        }
        Ok(Resources { lexicon, dictionary })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, RunConfig::default());
    }

    #[test]
    fn partial_file() {
        let c: RunConfig = toml::from_str(
            "seed = 3\n[features]\nset = \"all_syntactic\"\nsubtree_mode = \"normalized\"\n[model]\nkind = \"naive_bayes\"\nn_rounds = 7\n[evaluation]\nscheme = \"four\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.features.set, FeatureSet::AllSyntactic);
        assert_eq!(c.features.subtree_mode, SubtreeMode::Normalized);
        assert_eq!(c.model.kind, ModelKind::NaiveBayes);
        assert_eq!(c.model.n_rounds, 7);
        assert_eq!(c.model.max_depth, GbtParams::default().max_depth);
        assert_eq!(c.evaluation.scheme, AggregationScheme::Four);
        assert_eq!(c.model_spec().seed, 3);
    }

    #[test]
    fn numeric_log_base() {
        let c: RunConfig = toml::from_str("[analytics]\nlog_base = \"10\"\nrounding = \"ceil\"\n").unwrap();
        assert_eq!(c.bin_config().base, LogBase::Ten);
        assert_eq!(c.bin_config().rounding, Rounding::Ceil);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 1\n").is_err());
        assert!(toml::from_str::<RunConfig>("[model]\ndepth = 1\n").is_err());
    }
}
