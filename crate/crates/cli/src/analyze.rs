use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use icscore::analytics::{write_csv, CorpusAccumulator, ScoredRecord};
use serde::Serialize;

use crate::config::RunConfig;
use crate::inputs::{self, Manifest};

fn csv_file<T: Serialize>(dir: &Path, name: &str, rows: &[T], manifest: &mut Manifest) -> Result<()> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(BufWriter::new(file), rows)?;
    manifest.output(name);
    Ok(())
}

pub fn run(config: &RunConfig, scored: &Path, out: &Path) -> Result<()> {
    let mut acc = CorpusAccumulator::new(config.bin_config());
    for (i, line) in inputs::lines(scored)?.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ScoredRecord = serde_json::from_str(&line)
            .map_err(|e| crate::usage(format!("{}:{}: not a scored record: {e}", scored.display(), i + 1)))?;
        acc.add(&rec);
    }
    let report = acc.report();

    inputs::create_dir(out)?;
    let mut manifest = Manifest::new("analyze", config);
    manifest.input(scored)?;
    csv_file(out, "distribution.csv", &report.distribution, &mut manifest)?;
    csv_file(out, "binned_means.csv", &report.binned_means, &mut manifest)?;
    csv_file(out, "group_means.csv", &report.group_means, &mut manifest)?;
    match (&report.percentiles, &report.regressions) {
        (Some(p), Some(r)) => {
            csv_file(out, "percentiles.csv", p, &mut manifest)?;
            csv_file(out, "regression.csv", r, &mut manifest)?;
        }
        _ => log::warn!(
            "{} records lack a community score; skipping percentile boxes and regressions",
            report.missing_scores
        ),
    }
    inputs::write(&out.join("group_means.txt"), report.render_group_means())?;
    inputs::write_json(&out.join("report.json"), &report)?;
    manifest.output("group_means.txt");
    manifest.output("report.json");
    manifest.detail("records", report.records);
    manifest.detail("zero_length_excluded", report.zero_length_excluded);
    manifest.write(out)?;

    print!("{}", report.render_group_means());
    eprintln!(
        "{} records, {} without words excluded from length bins ({})",
        report.records, report.zero_length_excluded, report.bin_rule
    );
    Ok(())
}
