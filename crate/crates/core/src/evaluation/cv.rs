use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{confusion_matrix, mse, AggregationScheme, EvalError, EvalReport};
use crate::conllu::ParsedDocument;
use crate::features::{FeatureSpace, Resources};
use crate::model::{Classifier, ModelError, ModelSpec, TrainedModel};

/// Fold index for every example.
///
/// Indices are shuffled with the seed, then each class (ascending) is dealt
/// round-robin over the folds with one counter shared across classes, so
/// classes with at least `k` members appear in every fold and fold sizes
/// differ by at most one.
pub fn fold_assignments(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut fold = vec![0; labels.len()];
    let mut counter = 0;
    for class in classes {
        for &i in order.iter().filter(|&&i| labels[i] == class) {
            fold[i] = counter % k;
            counter += 1;
        }
    }
    fold
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub truth: u8,
    pub predicted: u8,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
    /// The space fitted on this fold's training part.
    #[serde(skip)]
    pub space: Option<FeatureSpace>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvResult {
    pub model: String,
    pub k: usize,
    pub seed: u64,
    pub mean_f1: f64,
    /// Population standard deviation of the per-fold weighted F1.
    pub std_f1: f64,
    pub mean_mse: f64,
    /// All held-out predictions scored together.
    pub pooled: EvalReport,
    pub folds: Vec<FoldResult>,
}

fn check_k(n: usize, k: usize) -> Result<(), EvalError> {
    if k < 2 || n < k {
        return Err(EvalError::TooFewExamples { n, k });
    }
    Ok(())
}

fn document_labels(corpus: &[ParsedDocument], scheme: AggregationScheme) -> Result<Vec<u8>, EvalError> {
    corpus
        .iter()
        .map(|d| {
            let band = d.label.ok_or_else(|| EvalError::MissingLabel(d.id.clone()))?;
            scheme.map(band.value())
        })
        .collect()
}

fn summarize(
    model: &str,
    scheme: AggregationScheme,
    classes: &[u8],
    k: usize,
    seed: u64,
    mut folds: Vec<FoldResult>,
) -> Result<CvResult, EvalError> {
    folds.sort_by_key(|f| f.fold);
    let f1s: Vec<f64> = folds.iter().map(|f| f.report.weighted_f1).collect();
    let mean_f1 = f1s.iter().sum::<f64>() / k as f64;
    let std_f1 = (f1s.iter().map(|f| (f - mean_f1).powi(2)).sum::<f64>() / k as f64).sqrt();
    let mean_mse = folds.iter().map(|f| f.report.mse).sum::<f64>() / k as f64;
    let truth: Vec<u8> = folds.iter().flat_map(|f| f.predictions.iter().map(|p| p.truth)).collect();
    let pred: Vec<u8> = folds.iter().flat_map(|f| f.predictions.iter().map(|p| p.predicted)).collect();
    let pooled = EvalReport::from_confusion(
        model,
        scheme,
        classes,
        confusion_matrix(&truth, &pred, classes)?,
        mse(&truth, &pred)?,
    );
    Ok(CvResult {
        model: model.to_string(),
        k,
        seed,
        mean_f1,
        std_f1,
        mean_mse,
        pooled,
        folds,
    })
}

/// k-fold cross-validation on labelled documents. Each fold fits its own
/// feature space on its training part only.
pub fn kfold_cv(
    corpus: &[ParsedDocument],
    spec: &ModelSpec,
    resources: &Resources,
    scheme: AggregationScheme,
    k: usize,
    seed: u64,
) -> Result<CvResult, EvalError> {
    check_k(corpus.len(), k)?;
    let labels = document_labels(corpus, scheme)?;
    let folds = fold_assignments(&labels, k, seed);
    let classes = scheme.groups();
    let name = spec.kind.name();
    let results = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| folds[i] != fold);
            let train_docs: Vec<ParsedDocument> = train.iter().map(|&i| corpus[i].clone()).collect();
            let train_labels: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
            let fitted = spec.fit(&train_docs, &train_labels, resources)?;
            let model = fitted.model;
            let predictions = test
                .iter()
                .map(|&i| {
                    Ok(Prediction {
                        doc_id: corpus[i].id.clone(),
                        truth: labels[i],
                        predicted: model.predict_doc(&corpus[i])?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            fold_result(name, scheme, &classes, fold, train.len(), predictions, Some(model.space))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    summarize(name, scheme, &classes, k, seed, results)
}

fn fold_result(
    name: &str,
    scheme: AggregationScheme,
    classes: &[u8],
    fold: usize,
    train_size: usize,
    predictions: Vec<Prediction>,
    space: Option<FeatureSpace>,
) -> Result<FoldResult, EvalError> {
    let truth: Vec<u8> = predictions.iter().map(|p| p.truth).collect();
    let pred: Vec<u8> = predictions.iter().map(|p| p.predicted).collect();
    Ok(FoldResult {
        fold,
        train_size,
        report: EvalReport::with_classes(name, scheme, classes, &truth, &pred)?,
        predictions,
        space,
    })
}

/// Cross-validation over plain feature vectors with a caller-supplied
/// learner. Report classes are the labels observed in `labels`.
pub fn cross_validate_rows<F, C>(
    name: &str,
    rows: &[Vec<f64>],
    labels: &[u8],
    k: usize,
    seed: u64,
    fit: F,
) -> Result<CvResult, EvalError>
where
    F: Fn(&[Vec<f64>], &[u8]) -> Result<C, ModelError> + Sync,
    C: Classifier,
{
    if rows.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            truth: labels.len(),
            pred: rows.len(),
        });
    }
    check_k(rows.len(), k)?;
    let folds = fold_assignments(labels, k, seed);
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let results = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| folds[i] != fold);
            let train_rows: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
            let train_labels: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
            let model = fit(&train_rows, &train_labels)?;
            let predictions = test
                .iter()
                .map(|&i| {
                    Ok(Prediction {
                        doc_id: i.to_string(),
                        truth: labels[i],
                        predicted: model.predict(&rows[i])?,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            fold_result(name, AggregationScheme::Seven, &classes, fold, train.len(), predictions, None)
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    summarize(name, AggregationScheme::Seven, &classes, k, seed, results)
}

/// Trains on `train`, scores `test`. Overlapping document ids are reported
/// but not refused.
pub fn heldout_eval(
    train: &[ParsedDocument],
    test: &[ParsedDocument],
    spec: &ModelSpec,
    resources: &Resources,
    scheme: AggregationScheme,
) -> Result<(EvalReport, TrainedModel), EvalError> {
    if test.is_empty() || train.is_empty() {
        return Err(EvalError::Empty);
    }
    let train_ids: HashSet<&str> = train.iter().map(|d| d.id.as_str()).collect();
    let overlap = test.iter().filter(|d| train_ids.contains(d.id.as_str())).count();
    if overlap > 0 {
        log::warn!("{overlap} test documents share an id with a training document");
    }
    let train_labels = document_labels(train, scheme)?;
    let test_labels = document_labels(test, scheme)?;
    let model = spec.fit(train, &train_labels, resources)?.model;
    let pred = test
        .iter()
        .map(|d| model.predict_doc(d))
        .collect::<Result<Vec<_>, ModelError>>()?;
    let report = EvalReport::compute(spec.kind.name(), scheme, &test_labels, &pred)?;
    Ok((report, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::train_majority;
    use crate::model::{Model, ModelKind};
    use crate::synth::CorpusGenerator;

    #[test]
    fn folds_are_balanced_and_stratified() {
        let labels: Vec<u8> = (0..53).map(|i| 1 + (i % 3) as u8).collect();
        let folds = fold_assignments(&labels, 5, 7);
        let mut sizes = [0usize; 5];
        for &f in &folds {
            sizes[f] += 1;
        }
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for class in 1..=3u8 {
            let mut per = [0usize; 5];
            for (i, &f) in folds.iter().enumerate() {
                if labels[i] == class {
                    per[f] += 1;
                }
            }
            assert!(per.iter().all(|&c| c >= 3), "{class}: {per:?}");
        }
        assert_eq!(folds, fold_assignments(&labels, 5, 7));
        assert_ne!(folds, fold_assignments(&labels, 5, 8));
    }

    #[test]
    fn too_few_examples() {
        let docs = CorpusGenerator::new(0).corpus(3);
        let err = kfold_cv(&docs, &ModelSpec::default(), &Resources::default(), AggregationScheme::Seven, 5, 0);
        assert!(matches!(err, Err(EvalError::TooFewExamples { n: 3, k: 5 })));
    }

    #[test]
    fn majority_cv_covers_every_document_once() {
        let docs = CorpusGenerator::new(1).corpus(30);
        let spec = ModelSpec { kind: ModelKind::Majority, ..ModelSpec::default() };
        let cv = kfold_cv(&docs, &spec, &Resources::default(), AggregationScheme::Four, 3, 0).unwrap();
        let mut ids: Vec<&str> = cv.folds.iter().flat_map(|f| f.predictions.iter().map(|p| p.doc_id.as_str())).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 30);
        assert_eq!(cv.pooled.n, 30);
        assert_eq!(cv.pooled.classes, [1, 2, 3, 4]);
        assert!(cv.std_f1 >= 0.0);
    }

    #[test]
    fn rows_cv_with_majority() {
        let rows = vec![vec![0.0]; 20];
        let labels: Vec<u8> = (0..20).map(|i| if i < 14 { 2 } else { 5 }).collect();
        let cv = cross_validate_rows("majority", &rows, &labels, 4, 0, |_, y| {
            Ok(Model::Majority(train_majority(y).map_err(ModelError::from)?))
        })
        .unwrap();
        assert_eq!(cv.pooled.classes, [2, 5]);
        assert_eq!(cv.pooled.per_class[0].recall, 1.0);
    }

    #[test]
    fn heldout_on_training_data() {
        let docs = CorpusGenerator::new(2).corpus(25);
        let spec = ModelSpec { kind: ModelKind::Majority, ..ModelSpec::default() };
        let (report, _) = heldout_eval(&docs, &docs, &spec, &Resources::default(), AggregationScheme::Seven).unwrap();
        assert_eq!(report.n, 25);
        assert!(matches!(
            heldout_eval(&docs, &[], &spec, &Resources::default(), AggregationScheme::Seven),
            Err(EvalError::Empty)
        ));
    }
}
