//! Reading corpora and artifacts, writing run directories.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use icscore::analytics::JsonlReader;
use icscore::{ConlluReader, ParsedDocument, TrainedModel};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::usage;

fn is_jsonl(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "ndjson"))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    match File::open(path) {
        Ok(f) => Ok(BufReader::new(f)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Err(usage(format!("{} does not exist", path.display()))),
        Err(e) => Err(e).with_context(|| format!("opening {}", path.display())),
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

/// Reads a whole corpus, failing on the first malformed document.
pub fn load_corpus(path: &Path) -> Result<Vec<ParsedDocument>> {
    let reader = open(path)?;
    let docs: Result<Vec<ParsedDocument>> = if is_jsonl(path) {
        JsonlReader::new(reader, base_dir(path))
            .map(|d| d.map_err(anyhow::Error::from))
            .collect()
    } else {
        ConlluReader::new(reader).map(|d| d.map_err(anyhow::Error::from)).collect()
    };
    let docs = docs.with_context(|| format!("reading {}", path.display()))?;
    if docs.is_empty() {
        return Err(usage(format!("{} holds no documents", path.display())));
    }
    Ok(docs)
}

/// Streams a corpus, logging and skipping malformed documents.
pub fn stream_corpus(path: &Path) -> Result<Box<dyn Iterator<Item = ParsedDocument>>> {
    let reader = open(path)?;
    let label = path.display().to_string();
    let skip = move |r: Result<ParsedDocument, String>| match r {
        Ok(d) => Some(d),
        Err(e) => {
            log::warn!("{label}: skipping malformed document: {e}");
            None
        }
    };
    Ok(if is_jsonl(path) {
        Box::new(JsonlReader::new(reader, base_dir(path)).map(|r| r.map_err(|e| e.to_string())).filter_map(skip))
    } else {
        Box::new(ConlluReader::new(reader).map(|r| r.map_err(|e| e.to_string())).filter_map(skip))
    })
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text)?;
    TrainedModel::from_json(&text).with_context(|| format!("loading model {}", path.display()))
}

pub fn lines(path: &Path) -> Result<io::Lines<BufReader<File>>> {
    Ok(open(path)?.lines())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Description of a run written next to its outputs. Holds no timestamps,
/// so identical runs give identical manifests.
#[derive(Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    config: RunConfig,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    /// Settings where reasonable readings differ, recorded explicitly.
    choices: BTreeMap<&'static str, String>,
    details: BTreeMap<String, serde_json::Value>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Manifest {
        let mut choices = BTreeMap::new();
        let subtree_mode = match config.features.subtree_mode {
            icscore::SubtreeMode::Binary => "binary",
            icscore::SubtreeMode::Normalized => "normalized",
        };
        choices.insert("subtree_mode", subtree_mode.to_string());
        choices.insert("subtree_max_edges", config.features.max_edges.to_string());
        choices.insert(
            "subtree_threshold",
            format!("min_freq {} counted as {:?}", config.features.min_freq, config.features.frequency_count).to_lowercase(),
        );
        choices.insert("length_bins", config.bin_config().to_string());
        choices.insert("label_scheme", config.evaluation.scheme.to_string());
        Manifest {
            tool: "icscore",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            choices,
            details: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let mut hasher = Sha256::new();
        let mut reader = open(path)?;
        let mut buf = [0u8; 64 * 1024];
        loop {
            let n = reader.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(hasher.finalize()),
        });
        Ok(())
    }

    pub fn output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).expect("manifest detail serializes"));
    }

    pub fn write(mut self, dir: &Path) -> Result<()> {
        self.outputs.sort();
        write_json(&dir.join("manifest.json"), &self)
    }
}
