use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use icscore::analytics::ScoredRecord;
use icscore::synth::CorpusGenerator;
use icscore::write_conllu;
use serde_json::Value;
use tempfile::TempDir;

fn icscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icscore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = icscore(args);
    assert!(
        out.status.success(),
        "icscore {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        Workspace { dir: TempDir::new().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn labeled(&self, name: &str, seed: u64, n: usize) -> PathBuf {
        let docs = CorpusGenerator::new(seed).corpus(n);
        let path = self.path(name);
        write_conllu(File::create(&path).unwrap(), &docs).unwrap();
        path
    }

    fn unlabeled(&self, name: &str, n: usize) -> PathBuf {
        let docs = CorpusGenerator::new(99).unlabeled_corpus(n, &["politics", "science", "gaming"]);
        let path = self.path(name);
        write_conllu(File::create(&path).unwrap(), &docs).unwrap();
        path
    }

    fn config(&self, body: &str) -> PathBuf {
        let path = self.path("run.toml");
        fs::write(&path, body).unwrap();
        path
    }
}

const FAST: &str = "seed = 7\n[model]\nn_rounds = 25\nmax_depth = 3\n";

fn train(ws: &Workspace, corpus: &Path, out: &str) -> PathBuf {
    let cfg = ws.config(FAST);
    let out = ws.path(out);
    ok(&["--config", s(&cfg), "train", "--corpus", s(corpus), "--out", s(&out)]);
    out
}

#[test]
fn missing_corpus_is_a_usage_error() {
    let ws = Workspace::new();
    let out = icscore(&["train", "--corpus", s(&ws.path("nope.conllu")), "--out", s(&ws.path("run"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.conllu"));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 1, 40);
    let cfg = ws.config("[model]\nn_round = 5\n");
    let out = icscore(&["--config", s(&cfg), "train", "--corpus", s(&corpus), "--out", s(&ws.path("run"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_lexicon_is_a_usage_error() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 1, 40);
    let out = icscore(&[
        "--lexicon",
        s(&ws.path("absent.tsv")),
        "train",
        "--corpus",
        s(&corpus),
        "--out",
        s(&ws.path("run")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn liwc_without_dictionary_is_a_usage_error() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 1, 40);
    let out = icscore(&["--features", "liwc", "train", "--corpus", s(&corpus), "--out", s(&ws.path("run"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_conllu_is_a_usage_error() {
    let ws = Workspace::new();
    let bad = ws.path("bad.conllu");
    fs::write(&bad, "# newdoc id = a\n# ic = 2\n1\tx\tx\tNN\n\n").unwrap();
    let out = icscore(&["train", "--corpus", s(&bad), "--out", s(&ws.path("run"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn training_twice_gives_identical_artifacts() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 3, 80);
    let a = train(&ws, &corpus, "a");
    let b = train(&ws, &corpus, "b");
    for name in ["model.json", "space.json", "subtrees.tsv", "importance.csv", "train_log.csv"] {
        let x = fs::read(a.join(name)).unwrap();
        let y = fs::read(b.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let manifest: Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["details"]["documents"], 80);
    assert!(manifest["inputs"][0]["sha256"].as_str().unwrap().len() == 64);
    assert_eq!(manifest["choices"]["subtree_mode"], "binary");
}

#[test]
fn importance_rows_are_sorted_by_gain() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 4, 80);
    let run = train(&ws, &corpus, "run");
    let text = fs::read_to_string(run.join("importance.csv")).unwrap();
    let gains: Vec<f64> = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(!gains.is_empty());
    assert!(gains.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn explain_contributions_reconstruct_the_raw_score() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 5, 80);
    let run = train(&ws, &corpus, "run");
    let out = ok(&[
        "explain",
        "--model",
        s(&run.join("model.json")),
        "--input",
        s(&corpus),
        "--doc",
        "syn000003",
        "--top",
        "1000",
        "--json",
    ]);
    let tables: Value = serde_json::from_slice(&out.stdout).unwrap();
    let t = &tables[0];
    assert_eq!(t["doc_id"], "syn000003");
    let raw = t["raw_score"].as_f64().unwrap();
    let rows: Vec<&Value> = t["top"].as_array().unwrap().iter().chain(t["bottom"].as_array().unwrap()).collect();
    assert!(rows.iter().any(|r| r["feature"] == "Bias term"), "bias row missing");
    let sum: f64 = rows.iter().map(|r| r["contribution"].as_f64().unwrap()).sum();
    assert!((sum - raw).abs() < 1e-9, "{sum} != {raw}");
}

#[test]
fn explain_rejects_baseline_models() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 5, 40);
    let out_dir = ws.path("run");
    ok(&["--model-kind", "majority", "train", "--corpus", s(&corpus), "--out", s(&out_dir)]);
    let out = icscore(&["explain", "--model", s(&out_dir.join("model.json")), "--input", s(&corpus)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn score_then_analyze_accounts_for_every_record() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 6, 80);
    let run = train(&ws, &corpus, "run");
    let input = ws.unlabeled("reddit.conllu", 120);
    let scored = ws.path("scored.jsonl");
    ok(&["score", "--model", s(&run.join("model.json")), "--input", s(&input), "--out", s(&scored), "--chunk", "16"]);

    let records: Vec<ScoredRecord> = fs::read_to_string(&scored)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 120);
    assert_eq!(records[0].doc_id, "syn000000");
    assert!(records.iter().all(|r| (1..=7).contains(&r.ic)));

    let report_dir = ws.path("analysis");
    ok(&["analyze", "--scored", s(&scored), "--out", s(&report_dir)]);
    let report: Value = serde_json::from_slice(&fs::read(report_dir.join("report.json")).unwrap()).unwrap();
    let binned: u64 = report["binned_means"].as_array().unwrap().iter().map(|b| b["n"].as_u64().unwrap()).sum();
    let excluded = report["zero_length_excluded"].as_u64().unwrap();
    assert_eq!(binned + excluded, 120);
    for name in ["distribution.csv", "group_means.csv", "percentiles.csv", "regression.csv", "manifest.json"] {
        assert!(report_dir.join(name).exists(), "{name} missing");
    }
}

#[test]
fn analyze_bin_rule_is_configurable() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 6, 60);
    let run = train(&ws, &corpus, "run");
    let input = ws.unlabeled("reddit.conllu", 50);
    let scored = ws.path("scored.jsonl");
    ok(&["score", "--model", s(&run.join("model.json")), "--input", s(&input), "--out", s(&scored)]);
    let dir = ws.path("analysis");
    ok(&["analyze", "--scored", s(&scored), "--out", s(&dir), "--log-base", "2", "--rounding", "ceil"]);
    let report: Value = serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap();
    let rule = report["bin_rule"].as_str().unwrap();
    assert!(rule.contains("base 2"), "{rule}");
    assert!(rule.contains("ceil"), "{rule}");
}

#[test]
fn score_with_missing_model_is_a_usage_error() {
    let ws = Workspace::new();
    let input = ws.unlabeled("reddit.conllu", 5);
    let out = icscore(&[
        "score",
        "--model",
        s(&ws.path("none.json")),
        "--input",
        s(&input),
        "--out",
        s(&ws.path("o.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cross_validation_writes_fold_reports() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 8, 100);
    let cfg = ws.config(FAST);
    let out_dir = ws.path("cv");
    let out = ok(&["--config", s(&cfg), "evaluate", "cv", "--corpus", s(&corpus), "--out", s(&out_dir), "--folds", "4"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("4-fold weighted F1"), "{stdout}");

    let cv: Value = serde_json::from_slice(&fs::read(out_dir.join("cv.json")).unwrap()).unwrap();
    assert_eq!(cv["folds"].as_array().unwrap().len(), 4);
    let pooled_n = cv["pooled"]["n"].as_u64().unwrap();
    assert_eq!(pooled_n, 100);
    let preds = fs::read_to_string(out_dir.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().count(), 101);
    let confusion = fs::read_to_string(out_dir.join("pooled_confusion.csv")).unwrap();
    let total: u64 = confusion
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|c| c.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 100);
}

#[test]
fn three_way_scheme_reports_grouped_labels() {
    let ws = Workspace::new();
    let corpus = ws.labeled("train.conllu", 9, 90);
    let cfg = ws.config(FAST);
    let out_dir = ws.path("cv");
    ok(&[
        "--config", s(&cfg), "--scheme", "three", "evaluate", "cv", "--corpus", s(&corpus), "--out", s(&out_dir),
        "--folds", "3",
    ]);
    let table = fs::read_to_string(out_dir.join("pooled.txt")).unwrap();
    assert!(table.contains("2+3"), "{table}");
}

#[test]
fn heldout_evaluation_with_training_corpus() {
    let ws = Workspace::new();
    let train_c = ws.labeled("train.conllu", 10, 80);
    let test_c = ws.labeled("test.conllu", 11, 30);
    let cfg = ws.config(FAST);
    let out_dir = ws.path("heldout");
    ok(&[
        "--config", s(&cfg), "evaluate", "heldout", "--train", s(&train_c), "--test", s(&test_c), "--out",
        s(&out_dir),
    ]);
    let report: Value = serde_json::from_slice(&fs::read(out_dir.join("heldout.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 30);
    assert!(out_dir.join("heldout_confusion.csv").exists());
}

#[test]
fn external_scores_are_compared_with_gold_labels() {
    let ws = Workspace::new();
    let gold = fixture("labeled.conllu");
    let scores = ws.path("auto.csv");
    fs::write(
        &scores,
        "doc_id,score\ntaxes,1.4\nban-cars,1.0\nthe-plan,2.9\nrent-law,3.2\nregions,4.0\nweigh-costs,5.5\nreconcile,6.1\n",
    )
    .unwrap();
    let out_dir = ws.path("ext");
    ok(&["evaluate", "heldout", "--test", s(&gold), "--external-scores", s(&scores), "--out", s(&out_dir)]);
    let report: Value = serde_json::from_slice(&fs::read(out_dir.join("external.json")).unwrap()).unwrap();
    assert_eq!(report["n"], 7);
    assert!((report["weighted_f1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn external_scores_missing_a_document_fail() {
    let ws = Workspace::new();
    let gold = fixture("labeled.conllu");
    let scores = ws.path("auto.csv");
    fs::write(&scores, "taxes,1\nban-cars,1\n").unwrap();
    let out = icscore(&[
        "evaluate",
        "heldout",
        "--test",
        s(&gold),
        "--external-scores",
        s(&scores),
        "--out",
        s(&ws.path("ext")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
