use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use icscore::analytics;

use crate::config::RunConfig;
use crate::inputs;

pub fn run(config: &RunConfig, model_path: &Path, input: &Path, out: &Path) -> Result<()> {
    let model = inputs::load_model(model_path)?;
    let docs = inputs::stream_corpus(input)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        inputs::create_dir(dir)?;
    }
    let file = File::create(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = BufWriter::new(file);
    let mut scorer = analytics::score_corpus(docs, &model, config.analytics.chunk_size);
    for rec in scorer.by_ref() {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let t = scorer.throughput();
    eprintln!(
        "scored {} documents ({} skipped) in {:.1}s, {:.0} docs/s",
        t.scored, t.skipped, t.seconds, t.docs_per_second
    );
    Ok(())
}
