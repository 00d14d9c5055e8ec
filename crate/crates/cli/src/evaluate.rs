use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{Context, Result};
use icscore::evaluation::{self, evaluate_external, heldout_eval, kfold_cv, parse_external_scores, CvResult};
use icscore::EvalReport;

use crate::config::RunConfig;
use crate::inputs::{self, Manifest};

fn write_report(dir: &Path, stem: &str, report: &EvalReport, manifest: &mut Manifest) -> Result<()> {
    inputs::write_json(&dir.join(format!("{stem}.json")), report)?;
    inputs::write(&dir.join(format!("{stem}.txt")), report.render_table())?;
    let mut csv = Vec::new();
    evaluation::write_confusion_csv(&mut csv, report)?;
    inputs::write(&dir.join(format!("{stem}_confusion.csv")), csv)?;
    for ext in ["json", "txt"] {
        manifest.output(&format!("{stem}.{ext}"));
    }
    manifest.output(&format!("{stem}_confusion.csv"));
    Ok(())
}

fn fold_table(cv: &CvResult) -> String {
    let mut text = String::from("fold,train_size,test_size,weighted_f1,mse\n");
    for f in &cv.folds {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            f.fold,
            f.train_size,
            f.predictions.len(),
            f.report.weighted_f1,
            f.report.mse
        ));
    }
    text
}

pub fn cv(config: &RunConfig, corpus_path: &Path, out: &Path) -> Result<()> {
    let resources = config.resources()?;
    let corpus = inputs::load_corpus(corpus_path)?;
    let spec = config.model_spec();
    let scheme = config.evaluation.scheme;
    let k = config.evaluation.folds;
    let result = kfold_cv(&corpus, &spec, &resources, scheme, k, config.seed)?;

    inputs::create_dir(out)?;
    let mut manifest = Manifest::new("evaluate cv", config);
    manifest.input(corpus_path)?;
    inputs::write_json(&out.join("cv.json"), &result)?;
    inputs::write(&out.join("folds.csv"), fold_table(&result))?;
    let mut preds = String::from("fold,doc_id,true,predicted\n");
    for f in &result.folds {
        for p in &f.predictions {
            preds.push_str(&format!("{},{},{},{}\n", f.fold, p.doc_id, p.truth, p.predicted));
        }
    }
    inputs::write(&out.join("predictions.csv"), preds)?;
    write_report(out, "pooled", &result.pooled, &mut manifest)?;
    for name in ["cv.json", "folds.csv", "predictions.csv"] {
        manifest.output(name);
    }
    manifest.detail("mean_f1", result.mean_f1);
    manifest.detail("std_f1", result.std_f1);
    manifest.detail("mean_mse", result.mean_mse);
    manifest.write(out)?;

    print!("{}", result.pooled.render_table());
    println!("{k}-fold weighted F1 {:.3} ± {:.3} (population sd), mean MSE {:.3}", result.mean_f1, result.std_f1, result.mean_mse);
    Ok(())
}

pub fn heldout(
    config: &RunConfig,
    train: Option<&Path>,
    test: &Path,
    external: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let test_docs = inputs::load_corpus(test)?;
    let scheme = config.evaluation.scheme;
    inputs::create_dir(out)?;
    let mut manifest = Manifest::new("evaluate heldout", config);
    manifest.input(test)?;

    if let Some(train_path) = train {
        let resources = config.resources()?;
        let train_docs = inputs::load_corpus(train_path)?;
        manifest.input(train_path)?;
        let (report, model) = heldout_eval(&train_docs, &test_docs, &config.model_spec(), &resources, scheme)?;
        write_report(out, "heldout", &report, &mut manifest)?;
        manifest.detail("feature_space_fingerprint", model.space.fingerprint());
        print!("{}", report.render_table());
    }
    if let Some(ext) = external {
        let file = File::open(ext).map_err(|e| crate::usage(format!("cannot open {}: {e}", ext.display())))?;
        let scores = parse_external_scores(BufReader::new(file)).with_context(|| format!("reading {}", ext.display()))?;
        manifest.input(ext)?;
        let report = evaluate_external("external", &test_docs, &scores, scheme)?;
        write_report(out, "external", &report, &mut manifest)?;
        print!("{}", report.render_table());
    }
    manifest.write(out)
}
