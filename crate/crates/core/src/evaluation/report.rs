use std::collections::HashMap;
use std::io::{self, BufRead};

use super::{AggregationScheme, EvalError, EvalReport};
use crate::conllu::ParsedDocument;

/// A prediction produced outside this toolkit.
#[derive(Clone, Debug, PartialEq)]
pub struct ExternalScore {
    pub doc_id: String,
    pub score: f64,
}

impl ExternalScore {
    /// Continuous scores are floored onto the band scale and clamped to 1..=7.
    pub fn band(&self) -> u8 {
        self.score.floor().clamp(1.0, 7.0) as u8
    }
}

/// Reads `doc_id,score` lines. A first line whose score column does not
/// parse is taken as a header.
pub fn parse_external_scores<R: BufRead>(input: R) -> Result<Vec<ExternalScore>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let bad = |msg: &str| EvalError::ExternalScores {
            line: i + 1,
            msg: msg.to_string(),
        };
        let (id, score) = trimmed.rsplit_once(',').ok_or_else(|| bad("expected doc_id,score"))?;
        match score.trim().parse::<f64>() {
            Ok(s) if s.is_finite() => out.push(ExternalScore {
                doc_id: id.trim().to_string(),
                score: s,
            }),
            Ok(_) => return Err(bad("score is not finite")),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(bad(&format!("cannot parse score {score:?}"))),
        }
    }
    Ok(out)
}

/// Scores external predictions against the labels of `corpus`.
pub fn evaluate_external(
    name: &str,
    corpus: &[ParsedDocument],
    scores: &[ExternalScore],
    scheme: AggregationScheme,
) -> Result<EvalReport, EvalError> {
    let by_id: HashMap<&str, &ExternalScore> = scores.iter().map(|s| (s.doc_id.as_str(), s)).collect();
    let mut truth = Vec::with_capacity(corpus.len());
    let mut pred = Vec::with_capacity(corpus.len());
    for doc in corpus {
        let label = doc.label.ok_or_else(|| EvalError::MissingLabel(doc.id.clone()))?;
        let s = by_id
            .get(doc.id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(doc.id.clone()))?;
        truth.push(scheme.map(label.value())?);
        pred.push(scheme.map(s.band())?);
    }
    EvalReport::compute(name, scheme, &truth, &pred)
}

/// Confusion matrix as CSV, rows true class, columns predicted class.
pub fn write_confusion_csv<W: io::Write>(mut out: W, report: &EvalReport) -> io::Result<()> {
    let header: Vec<String> = report.classes.iter().map(|c| report.scheme.group_label(*c)).collect();
    writeln!(out, "true\\predicted,{}", header.join(","))?;
    for (label, row) in header.iter().zip(&report.confusion) {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writeln!(out, "{label},{}", cells.join(","))?;
    }
    Ok(())
}
