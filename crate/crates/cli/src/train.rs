use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use icscore::Model;

use crate::config::RunConfig;
use crate::inputs::{self, Manifest};

pub fn run(config: &RunConfig, corpus_path: &Path, out: &Path) -> Result<()> {
    let resources = config.resources()?;
    let corpus = inputs::load_corpus(corpus_path)?;
    let scheme = config.evaluation.scheme;
    let labels = corpus
        .iter()
        .map(|d| {
            let band = d
                .label
                .ok_or_else(|| crate::usage(format!("document {} has no `# ic` label", d.id)))?;
            Ok(scheme.map(band.value())?)
        })
        .collect::<Result<Vec<u8>>>()?;

    let spec = config.model_spec();
    let fitted = spec.fit(&corpus, &labels, &resources)?;
    let model = &fitted.model;

    inputs::create_dir(out)?;
    let mut manifest = Manifest::new("train", config);
    manifest.input(corpus_path)?;

    inputs::write(&out.join("model.json"), model.to_json()?)?;
    inputs::write(&out.join("space.json"), model.space.to_json()?)?;
    let mut vocab = BufWriter::new(File::create(out.join("subtrees.tsv"))?);
    model.space.write_subtree_vocabulary(&mut vocab)?;
    vocab.flush()?;

    let mut log = String::from("round,log_loss\n");
    for (i, loss) in fitted.round_losses.iter().enumerate() {
        log.push_str(&format!("{},{loss}\n", i + 1));
    }
    inputs::write(&out.join("train_log.csv"), log)?;

    if let Some(gbt) = model.model.as_gbt() {
        let mut rows: Vec<(String, f64)> = gbt.feature_importance().into_iter().collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut text = String::from("feature,mean_gain\n");
        for (id, gain) in rows {
            text.push_str(&format!("{id},{gain}\n"));
        }
        inputs::write(&out.join("importance.csv"), text)?;
        manifest.output("importance.csv");
    }
    if let Model::Majority(m) = &model.model {
        log::info!("majority class {}", m.class);
    }

    for name in ["model.json", "space.json", "subtrees.tsv", "train_log.csv"] {
        manifest.output(name);
    }
    manifest.detail("documents", corpus.len());
    manifest.detail("feature_dimension", model.space.dimension());
    manifest.detail("feature_space_fingerprint", model.space.fingerprint());
    manifest.detail("classes", model.classes());
    manifest.write(out).context("writing manifest")?;
    eprintln!(
        "trained {} on {} documents, {} features -> {}",
        spec.kind.name(),
        corpus.len(),
        model.space.dimension(),
        out.display()
    );
    Ok(())
}
