use std::path::Path;

use anyhow::Result;
use icscore::gbt::ContributionTable;

use crate::inputs;
use crate::usage;

pub fn run(model_path: &Path, input: &Path, doc: Option<&str>, class: Option<u8>, top: usize, json: bool) -> Result<()> {
    let trained = inputs::load_model(model_path)?;
    let Some(gbt) = trained.model.as_gbt() else {
        return Err(usage(format!(
            "{} holds a {} model; only boosted models can be explained",
            model_path.display(),
            trained.kind().name()
        )));
    };
    let mut docs = inputs::load_corpus(input)?;
    if let Some(id) = doc {
        docs.retain(|d| d.id == id);
        if docs.is_empty() {
            return Err(usage(format!("no document {id:?} in {}", input.display())));
        }
    }
    let mut tables = Vec::with_capacity(docs.len());
    for d in &docs {
        let x = trained.space.vectorize(d).values;
        let class_id = match class {
            Some(c) => c,
            None => gbt.predict(&x)?,
        };
        let attribution = gbt.explain(&x, class_id).map_err(|e| usage(e.to_string()))?;
        tables.push(ContributionTable::new(&d.id, &attribution, &gbt.feature_ids, &x, top));
    }
    if json {
        println!("{}", serde_json::to_string_pretty(&tables)?);
    } else {
        for t in &tables {
            println!("{}", t.render());
        }
    }
    Ok(())
}
