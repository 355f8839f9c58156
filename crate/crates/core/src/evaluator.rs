//! Character-level metrics (IoU and probability correlation), trivial
//! baselines, and per-language report aggregation.

use crate::datamodel::{CharSpan, PredictionSet, Record, SoftLabel};
use crate::error::{Error, Result};
use crate::num;
use crate::Score;
use serde::Serialize;
use std::collections::BTreeMap;

/// Which coefficient "corr" means. Spearman is the default; Pearson is kept
/// as a switch so parity against other scorers can be checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationKind {
    #[default]
    Spearman,
    Pearson,
}

impl std::str::FromStr for CorrelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "spearman" => Ok(CorrelationKind::Spearman),
            "pearson" => Ok(CorrelationKind::Pearson),
            other => Err(Error::config(
                "metric",
                format!("unknown correlation kind {other:?}"),
            )),
        }
    }
}

fn coverage(spans: &[CharSpan], len: usize) -> Result<Vec<bool>> {
    let mut covered = vec![false; len];
    for span in spans {
        if span.start >= span.end || span.end > len {
            return Err(Error::validation(
                "span",
                format!(
                    "({}, {}) out of range for text length {len}",
                    span.start, span.end
                ),
            ));
        }
        for c in covered.iter_mut().take(span.end).skip(span.start) {
            *c = true;
        }
    }
    Ok(covered)
}

/// Character-level intersection-over-union of two span lists. Two empty
/// sets agree perfectly (IoU 1): predicting "no hallucination" on a clean
/// record is a correct prediction.
pub fn char_iou(pred: &[CharSpan], gold: &[CharSpan], len: usize) -> Result<Score> {
    let p = coverage(pred, len)?;
    let g = coverage(gold, len)?;
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (pi, gi) in p.iter().zip(g.iter()) {
        if *pi && *gi {
            intersection += 1;
        }
        if *pi || *gi {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(intersection as Score / union as Score)
}

/// Per-character probability vector: each character takes the max probability
/// of any covering span, zero when uncovered.
fn prob_profile(labels: &[SoftLabel], len: usize) -> Result<Vec<Score>> {
    let mut profile = vec![0.0; len];
    for label in labels {
        let span = label.span();
        if span.start >= span.end || span.end > len {
            return Err(Error::validation(
                "span",
                format!(
                    "({}, {}) out of range for text length {len}",
                    span.start, span.end
                ),
            ));
        }
        for p in profile.iter_mut().take(span.end).skip(span.start) {
            *p = Score::max(*p, label.prob);
        }
    }
    Ok(profile)
}

/// Correlation between predicted and annotated per-character probabilities.
/// `None` when either profile is constant (zero variance), in which case the
/// record is excluded from aggregate means and flagged in reports.
pub fn char_correlation(
    pred: &[SoftLabel],
    gold: &[SoftLabel],
    len: usize,
    kind: CorrelationKind,
) -> Result<Option<Score>> {
    let p_hat = prob_profile(pred, len)?;
    let p = prob_profile(gold, len)?;
    Ok(match kind {
        CorrelationKind::Spearman => num::spearman(&p_hat, &p),
        CorrelationKind::Pearson => num::pearson(&p_hat, &p),
    })
}

/// The "mark all" baseline: the whole answer is one hallucination span with
/// probability 1.
pub fn baseline_mark_all(record: &Record) -> PredictionSet {
    let len = record.output_char_len();
    if len == 0 {
        return PredictionSet::empty(record.id.clone());
    }
    PredictionSet {
        id: record.id.clone(),
        hard_spans: vec![CharSpan::new(0, len)],
        soft_spans: vec![SoftLabel {
            start: 0,
            end: len,
            prob: 1.0,
        }],
    }
}

/// The "mark none" baseline: no spans at all.
pub fn baseline_mark_none(record: &Record) -> PredictionSet {
    PredictionSet::empty(record.id.clone())
}

/// Metrics for one record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordEval {
    pub id: String,
    pub lang: String,
    pub iou: Score,
    /// 0 contribution when undefined; see `cor_defined`.
    pub cor: Score,
    pub cor_defined: bool,
}

/// Per-language aggregates. Correlation means are computed over defined
/// values only; the counts say how many records that was.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LanguageSummary {
    pub lang: String,
    pub records: usize,
    pub mean_iou: Score,
    pub mean_cor: Score,
    pub cor_defined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub records: Vec<RecordEval>,
    pub languages: Vec<LanguageSummary>,
}

/// Evaluate one prediction against one gold record.
pub fn evaluate_record(
    record: &Record,
    pred: &PredictionSet,
    id: &str,
    kind: CorrelationKind,
) -> Result<RecordEval> {
    let len = record.output_char_len();
    let wrap = |e: Error| Error::Metric {
        record: id.to_string(),
        message: e.to_string(),
    };
    let iou = char_iou(&pred.hard_spans, &record.hard_labels, len).map_err(wrap)?;
    let cor = char_correlation(&pred.soft_spans, &record.soft_labels, len, kind).map_err(wrap)?;
    Ok(RecordEval {
        id: id.to_string(),
        lang: record.lang.clone(),
        iou,
        cor: cor.unwrap_or(0.0),
        cor_defined: cor.is_some(),
    })
}

/// Fold per-record metrics into per-language summaries, in language order.
pub fn aggregate(records: Vec<RecordEval>) -> EvalReport {
    let mut by_lang: BTreeMap<String, Vec<&RecordEval>> = BTreeMap::new();
    for r in &records {
        by_lang.entry(r.lang.clone()).or_default().push(r);
    }
    let languages = by_lang
        .into_iter()
        .map(|(lang, rows)| {
            let ious: Vec<Score> = rows.iter().map(|r| r.iou).collect();
            let cors: Vec<Score> = rows
                .iter()
                .filter(|r| r.cor_defined)
                .map(|r| r.cor)
                .collect();
            LanguageSummary {
                lang,
                records: rows.len(),
                mean_iou: num::mean(&ious).unwrap_or(0.0),
                mean_cor: num::mean(&cors).unwrap_or(0.0),
                cor_defined: cors.len(),
            }
        })
        .collect();
    EvalReport { records, languages }
}

/// Machine-readable report: one JSON object per record line.
pub fn report_jsonl(report: &EvalReport) -> String {
    let mut out = String::new();
    for r in &report.records {
        out.push_str(&serde_json::to_string(r).expect("record evals serialize"));
        out.push('\n');
    }
    out
}

/// Human-readable comparison: systems as rows, languages as column pairs.
pub fn render_table(systems: &[(&str, &EvalReport)]) -> String {
    let mut langs: Vec<String> = systems
        .iter()
        .flat_map(|(_, r)| r.languages.iter().map(|l| l.lang.clone()))
        .collect();
    langs.sort();
    langs.dedup();

    let name_width = systems
        .iter()
        .map(|(n, _)| n.len())
        .max()
        .unwrap_or(6)
        .max("system".len());
    let mut out = String::new();
    out.push_str(&format!("{:<name_width$}", "system"));
    for lang in &langs {
        out.push_str(&format!("  {:>7} {:>7}", format!("{lang}/IoU"), "Cor"));
    }
    out.push('\n');
    for (name, report) in systems {
        out.push_str(&format!("{name:<name_width$}"));
        for lang in &langs {
            match report.languages.iter().find(|l| &l.lang == lang) {
                Some(l) => {
                    out.push_str(&format!("  {:>7.4} {:>7.4}", l.mean_iou, l.mean_cor));
                }
                None => out.push_str(&format!("  {:>7} {:>7}", "-", "-")),
            }
        }
        out.push('\n');
    }
    out
}
