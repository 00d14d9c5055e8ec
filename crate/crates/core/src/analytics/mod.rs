//! Batch scoring of unlabeled corpora and the per-community summaries
//! computed from the scored records.

mod input;
pub mod stats;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conllu::ParsedDocument;
use crate::model::{ModelError, TrainedModel};

pub use input::{document_from_record, InputError, InputRecord, JsonlReader};
pub use stats::{letter_values, BinConfig, LetterValue, LogBase, Moments, OlsAccumulator, Rounding};

pub const DEFAULT_CHUNK: usize = 1024;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("{0} records carry no community score")]
    MissingScores(u64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Post,
    #[default]
    Comment,
}

impl RecordKind {
    /// `post` and `submission` are posts; anything else is a comment.
    pub fn parse_lenient(s: &str) -> RecordKind {
        match s.trim().to_ascii_lowercase().as_str() {
            "post" | "submission" => RecordKind::Post,
            _ => RecordKind::Comment,
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::Post => "post",
            RecordKind::Comment => "comment",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub doc_id: String,
    pub community: String,
    pub kind: RecordKind,
    pub word_count: usize,
    pub ic: u8,
    /// Probability of bands 1..=7; classes the model never saw get 0.
    pub proba: [f64; 7],
    pub community_score: Option<i64>,
}

pub const UNKNOWN_COMMUNITY: &str = "unknown";

/// Scores one document.
pub fn score_document(model: &TrainedModel, doc: &ParsedDocument) -> Result<ScoredRecord, ModelError> {
    let p = model.predict_proba_doc(doc)?;
    let ic = model.predict_doc(doc)?;
    let mut proba = [0.0; 7];
    for (&class, &v) in model.classes().iter().zip(&p) {
        if (1..=7).contains(&class) {
            proba[class as usize - 1] = v;
        }
    }
    Ok(ScoredRecord {
        doc_id: doc.id.clone(),
        community: doc
            .meta
            .get("community")
            .cloned()
            .unwrap_or_else(|| UNKNOWN_COMMUNITY.to_string()),
        kind: doc.meta.get("kind").map_or_else(RecordKind::default, |k| RecordKind::parse_lenient(k)),
        word_count: doc.word_count(),
        ic,
        proba,
        community_score: doc.meta_f64("community_score").map(|s| s.round() as i64),
    })
}

/// Streaming scorer: pulls documents in chunks, scores each chunk in
/// parallel and yields records in input order. Documents that fail to
/// score are logged and skipped.
pub struct Scorer<'m, I> {
    model: &'m TrainedModel,
    docs: I,
    chunk: usize,
    ready: VecDeque<ScoredRecord>,
    started: Instant,
    scored: usize,
    skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub scored: usize,
    pub skipped: usize,
    pub seconds: f64,
    pub docs_per_second: f64,
}

pub fn score_corpus<I>(docs: I, model: &TrainedModel, chunk: usize) -> Scorer<'_, I::IntoIter>
where
    I: IntoIterator<Item = ParsedDocument>,
{
    Scorer {
        model,
        docs: docs.into_iter(),
        chunk: chunk.max(1),
        ready: VecDeque::new(),
        started: Instant::now(),
        scored: 0,
        skipped: 0,
    }
}

impl<I: Iterator<Item = ParsedDocument>> Scorer<'_, I> {
    pub fn throughput(&self) -> Throughput {
        let seconds = self.started.elapsed().as_secs_f64();
        Throughput {
            scored: self.scored,
            skipped: self.skipped,
            seconds,
            docs_per_second: if seconds > 0.0 { self.scored as f64 / seconds } else { 0.0 },
        }
    }

    fn refill(&mut self) {
        let batch: Vec<ParsedDocument> = self.docs.by_ref().take(self.chunk).collect();
        let model = self.model;
        let results: Vec<_> = batch.par_iter().map(|d| (d, score_document(model, d))).collect();
        for (doc, r) in results {
            match r {
                Ok(rec) => {
                    self.scored += 1;
                    self.ready.push_back(rec);
                }
                Err(e) => {
                    self.skipped += 1;
                    log::warn!("skipping document {}: {e}", doc.id);
                }
            }
        }
    }
}

impl<I: Iterator<Item = ParsedDocument>> Iterator for Scorer<'_, I> {
    type Item = ScoredRecord;

    fn next(&mut self) -> Option<ScoredRecord> {
        while self.ready.is_empty() {
            let before = self.scored + self.skipped;
            self.refill();
            if self.scored + self.skipped == before {
                return None;
            }
        }
        self.ready.pop_front()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub community: String,
    pub kind: RecordKind,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct GroupStats {
    band_counts: [u64; 7],
    ic: Moments,
    bins: BTreeMap<i64, Moments>,
    zero_length: u64,
    scores: [Vec<i64>; 7],
    ols: OlsAccumulator,
    missing_scores: u64,
}

impl GroupStats {
    fn merge(&mut self, o: &GroupStats) {
        for b in 0..7 {
            self.band_counts[b] += o.band_counts[b];
            self.scores[b].extend_from_slice(&o.scores[b]);
        }
        self.ic.merge(&o.ic);
        for (bin, m) in &o.bins {
            self.bins.entry(*bin).or_default().merge(m);
        }
        self.zero_length += o.zero_length;
        self.ols.merge(&o.ols);
        self.missing_scores += o.missing_scores;
    }
}

/// Partial statistics over scored records. `merge` is associative and
/// commutative, so any chunking of the input gives the same report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusAccumulator {
    pub bins: BinConfig,
    groups: BTreeMap<GroupKey, GroupStats>,
}

impl CorpusAccumulator {
    pub fn new(bins: BinConfig) -> CorpusAccumulator {
        CorpusAccumulator {
            bins,
            groups: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, r: &ScoredRecord) {
        let key = GroupKey {
            community: r.community.clone(),
            kind: r.kind,
        };
        let g = self.groups.entry(key).or_default();
        let band = r.ic.clamp(1, 7);
        g.band_counts[band as usize - 1] += 1;
        g.ic.add(band as i64);
        match self.bins.bin(r.word_count) {
            Some(bin) => g.bins.entry(bin).or_default().add(band as i64),
            None => g.zero_length += 1,
        }
        match r.community_score {
            Some(s) => {
                g.scores[band as usize - 1].push(s);
                g.ols.add(band as i64, s);
            }
            None => g.missing_scores += 1,
        }
    }

    pub fn merge(&mut self, other: &CorpusAccumulator) {
        for (k, g) in &other.groups {
            self.groups.entry(k.clone()).or_default().merge(g);
        }
    }

    pub fn total(&self) -> u64 {
        self.groups.values().map(|g| g.ic.n).sum()
    }

    pub fn zero_length(&self) -> u64 {
        self.groups.values().map(|g| g.zero_length).sum()
    }

    pub fn missing_scores(&self) -> u64 {
        self.groups.values().map(|g| g.missing_scores).sum()
    }

    pub fn distribution(&self) -> Vec<DistributionRow> {
        let mut out = Vec::new();
        for (k, g) in &self.groups {
            let n: u64 = g.band_counts.iter().sum();
            for (i, &count) in g.band_counts.iter().enumerate() {
                out.push(DistributionRow {
                    community: k.community.clone(),
                    kind: k.kind,
                    band: i as u8 + 1,
                    count,
                    mass: count as f64 / n as f64,
                });
            }
        }
        out
    }

    pub fn binned_means(&self) -> Vec<BinnedStat> {
        let mut out = Vec::new();
        for (k, g) in &self.groups {
            for (&bin, m) in &g.bins {
                out.push(BinnedStat {
                    community: k.community.clone(),
                    kind: k.kind,
                    bin,
                    n: m.n,
                    mean_ic: m.mean(),
                    ci95_halfwidth: m.ci95_halfwidth(),
                });
            }
        }
        out
    }

    pub fn group_means(&self) -> Vec<GroupMean> {
        self.groups
            .iter()
            .map(|(k, g)| GroupMean {
                community: k.community.clone(),
                kind: k.kind,
                n: g.ic.n,
                mean_ic: g.ic.mean(),
                std_ic: g.ic.sample_sd(),
            })
            .collect()
    }

    fn require_scores(&self) -> Result<(), AnalyticsError> {
        match self.missing_scores() {
            0 => Ok(()),
            n => Err(AnalyticsError::MissingScores(n)),
        }
    }

    pub fn percentiles(&self) -> Result<Vec<PercentileBox>, AnalyticsError> {
        self.require_scores()?;
        let mut out = Vec::new();
        for (k, g) in &self.groups {
            for (b, scores) in g.scores.iter().enumerate() {
                let data: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
                for lv in letter_values(&data) {
                    out.push(PercentileBox {
                        community: k.community.clone(),
                        kind: k.kind,
                        band: b as u8 + 1,
                        n: data.len(),
                        level: lv.level,
                        label: lv.label,
                        depth: lv.depth,
                        lower: lv.lower,
                        upper: lv.upper,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn regressions(&self) -> Result<Vec<Regression>, AnalyticsError> {
        self.require_scores()?;
        Ok(self
            .groups
            .iter()
            .map(|(k, g)| {
                let fit = g.ols.fit();
                Regression {
                    community: k.community.clone(),
                    kind: k.kind,
                    n: g.ols.n,
                    slope: fit.map(|f| f.0),
                    intercept: fit.map(|f| f.1),
                }
            })
            .collect())
    }

    /// Every summary; score-based ones are omitted (with the count of
    /// unscored records kept) when some record lacks a community score.
    pub fn report(&self) -> CorpusReport {
        CorpusReport {
            bin_config: self.bins,
            bin_rule: self.bins.to_string(),
            records: self.total(),
            zero_length_excluded: self.zero_length(),
            missing_scores: self.missing_scores(),
            distribution: self.distribution(),
            binned_means: self.binned_means(),
            group_means: self.group_means(),
            percentiles: self.percentiles().ok(),
            regressions: self.regressions().ok(),
        }
    }
}

pub fn accumulate<'a>(records: impl IntoIterator<Item = &'a ScoredRecord>, bins: BinConfig) -> CorpusAccumulator {
    let mut acc = CorpusAccumulator::new(bins);
    for r in records {
        acc.add(r);
    }
    acc
}

/// Probability mass over bands 1..=7 per group.
pub fn ic_distribution<'a>(records: impl IntoIterator<Item = &'a ScoredRecord>) -> BTreeMap<GroupKey, [f64; 7]> {
    let acc = accumulate(records, BinConfig::default());
    acc.groups
        .iter()
        .map(|(k, g)| {
            let n: u64 = g.band_counts.iter().sum();
            (k.clone(), g.band_counts.map(|c| c as f64 / n as f64))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub community: String,
    pub kind: RecordKind,
    pub band: u8,
    pub count: u64,
    pub mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedStat {
    pub community: String,
    pub kind: RecordKind,
    pub bin: i64,
    pub n: u64,
    pub mean_ic: f64,
    pub ci95_halfwidth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMean {
    pub community: String,
    pub kind: RecordKind,
    pub n: u64,
    pub mean_ic: f64,
    pub std_ic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercentileBox {
    pub community: String,
    pub kind: RecordKind,
    pub band: u8,
    pub n: usize,
    pub level: usize,
    pub label: String,
    pub depth: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub community: String,
    pub kind: RecordKind,
    pub n: u64,
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub bin_config: BinConfig,
    pub bin_rule: String,
    pub records: u64,
    pub zero_length_excluded: u64,
    pub missing_scores: u64,
    pub distribution: Vec<DistributionRow>,
    pub binned_means: Vec<BinnedStat>,
    pub group_means: Vec<GroupMean>,
    pub percentiles: Option<Vec<PercentileBox>>,
    pub regressions: Option<Vec<Regression>>,
}

impl CorpusReport {
    /// Mean and standard deviation of IC per community and kind.
    pub fn render_group_means(&self) -> String {
        use std::fmt::Write as _;
        let width = self
            .group_means
            .iter()
            .map(|g| g.community.len())
            .max()
            .unwrap_or(9)
            .max(9);
        let mut out = String::new();
        let _ = writeln!(out, "{:<width$}  {:<7}  {:>8}  {:>6}  {:>6}", "Community", "Kind", "n", "mean", "std");
        for g in &self.group_means {
            let _ = writeln!(
                out,
                "{:<width$}  {:<7}  {:>8}  {:>6.2}  {:>6.2}",
                g.community,
                g.kind.to_string(),
                g.n,
                g.mean_ic,
                g.std_ic
            );
        }
        out
    }
}

/// Writes `rows` as CSV with a header derived from the row fields.
pub fn write_csv<W: io::Write, T: Serialize>(out: W, rows: &[T]) -> Result<(), AnalyticsError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(community: &str, ic: u8, wc: usize, score: Option<i64>) -> ScoredRecord {
        let mut proba = [0.0; 7];
        proba[ic as usize - 1] = 1.0;
        ScoredRecord {
            doc_id: format!("{community}-{ic}-{wc}"),
            community: community.into(),
            kind: RecordKind::Post,
            word_count: wc,
            ic,
            proba,
            community_score: score,
        }
    }

    #[test]
    fn distribution_masses() {
        let rs: Vec<_> = [1, 1, 2, 3].iter().map(|&b| rec("a", b, 10, Some(1))).collect();
        let d = ic_distribution(&rs);
        let m = d.values().next().unwrap();
        assert_eq!(m[..3], [0.5, 0.25, 0.25]);
        assert_eq!(m.iter().sum::<f64>(), 1.0);

        let ones: Vec<_> = (0..5).map(|_| rec("b", 1, 3, None)).collect();
        assert_eq!(ic_distribution(&ones).values().next().unwrap()[0], 1.0);
    }

    #[test]
    fn bins_sum_to_binned_records() {
        let mut rs: Vec<_> = (0..50).map(|i| rec("a", 1 + (i % 7) as u8, i * 7, Some(0))).collect();
        rs.push(rec("a", 2, 0, Some(0)));
        let acc = accumulate(&rs, BinConfig::default());
        let binned: u64 = acc.binned_means().iter().map(|b| b.n).sum();
        assert_eq!(acc.zero_length(), 2);
        assert_eq!(binned + acc.zero_length(), rs.len() as u64);
        let single = acc.binned_means().into_iter().find(|b| b.bin == 0);
        assert!(single.is_none_or(|b| b.n > 1 || b.ci95_halfwidth == 0.0));
    }

    #[test]
    fn missing_scores_block_percentiles_only() {
        let rs = vec![rec("a", 1, 5, Some(3)), rec("a", 2, 5, None)];
        let acc = accumulate(&rs, BinConfig::default());
        assert!(matches!(acc.percentiles(), Err(AnalyticsError::MissingScores(1))));
        let report = acc.report();
        assert!(report.percentiles.is_none());
        assert_eq!(report.group_means[0].n, 2);
    }

    #[test]
    fn chunked_merge_equals_single_pass() {
        let rs: Vec<_> = (0..97)
            .map(|i| rec(["x", "y", "z"][i % 3], 1 + (i * 5 % 7) as u8, i * 3 + 1, Some((i * i % 41) as i64 - 7)))
            .collect();
        let whole = accumulate(&rs, BinConfig::default());
        for chunk in [1, 5, 32] {
            let parts: Vec<_> = rs.chunks(chunk).map(|c| accumulate(c, BinConfig::default())).collect();
            let mut merged = CorpusAccumulator::default();
            for p in parts.iter().rev() {
                merged.merge(p);
            }
            assert_eq!(merged.report(), whole.report());
        }
    }

    #[test]
    fn csv_has_header() {
        let rs = vec![rec("a", 3, 20, Some(1))];
        let acc = accumulate(&rs, BinConfig::default());
        let mut buf = Vec::new();
        write_csv(&mut buf, &acc.binned_means()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "community,kind,bin,n,mean_ic,ci95_halfwidth\na,post,3,1,3.0,0.0\n");
        let table = acc.report().render_group_means();
        assert!(table.contains("post") && table.contains("3.00"));
    }
}
