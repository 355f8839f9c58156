//! Shared domain types, JSONL record parsing/serialization, and config
//! validation.
//!
//! All character offsets throughout the crate are counted in Unicode scalar
//! values, never bytes: the task metrics are character-level and byte offsets
//! are ambiguous across scripts. Spans are start-inclusive, end-exclusive.

use crate::error::{Error, Result};
use crate::Score;
use serde::{Deserialize, Serialize};

/// Half-open character span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "(usize, usize)", from = "(usize, usize)")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        CharSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Number of characters shared with `other`.
    pub fn overlap(&self, other: &CharSpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    /// Smallest span covering both.
    pub fn hull(&self, other: &CharSpan) -> CharSpan {
        CharSpan::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl From<(usize, usize)> for CharSpan {
    fn from((start, end): (usize, usize)) -> Self {
        CharSpan { start, end }
    }
}

impl From<CharSpan> for (usize, usize) {
    fn from(s: CharSpan) -> Self {
        (s.start, s.end)
    }
}

/// Span annotated with a hallucination probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    pub start: usize,
    pub end: usize,
    pub prob: Score,
}

impl SoftLabel {
    pub fn span(&self) -> CharSpan {
        CharSpan::new(self.start, self.end)
    }
}

fn id_to_string<'de, D>(deserializer: D) -> std::result::Result<Option<String>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let v = Option::<serde_json::Value>::deserialize(deserializer)?;
    Ok(v.map(|v| match v {
        serde_json::Value::String(s) => s,
        other => other.to_string(),
    }))
}

/// One task datapoint: query, generated answer, and gold span labels.
///
/// Missing label fields parse as empty lists so test-split records (which
/// carry no gold) flow through the same code paths as validation records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Record identity when the file provides one; callers fall back to the
    /// line position otherwise.
    #[serde(default, deserialize_with = "id_to_string")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub lang: String,
    #[serde(default)]
    pub model_input: String,
    pub model_output_text: String,
    #[serde(default)]
    pub hard_labels: Vec<CharSpan>,
    #[serde(default)]
    pub soft_labels: Vec<SoftLabel>,
    /// Pre-generated sampled answers, when the record is self-contained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_texts: Option<Vec<String>>,
}

impl Record {
    /// Length of the answer in Unicode scalar values.
    pub fn output_char_len(&self) -> usize {
        self.model_output_text.chars().count()
    }

    /// Explicit id, or a positional fallback shared by every file consumer.
    pub fn id_or_index(&self, index: usize) -> String {
        self.id.clone().unwrap_or_else(|| format!("record-{index}"))
    }
}

/// Parse one JSONL line into a validated [`Record`].
pub fn parse_record(line: &str) -> Result<Record> {
    let record: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: e.line(),
        byte_offset: e.column().saturating_sub(1),
        message: e.to_string(),
    })?;
    validate_record(record)
}

fn validate_record(record: Record) -> Result<Record> {
    let len = record.output_char_len();
    for (i, span) in record.hard_labels.iter().enumerate() {
        validate_span(*span, len, &format!("hard_labels[{i}]"))?;
    }
    for (i, label) in record.soft_labels.iter().enumerate() {
        validate_span(label.span(), len, &format!("soft_labels[{i}]"))?;
        if !(0.0..=1.0).contains(&label.prob) {
            return Err(Error::validation(
                format!("soft_labels[{i}].prob"),
                format!("probability {} outside [0, 1]", label.prob),
            ));
        }
    }
    Ok(record)
}

fn validate_span(span: CharSpan, text_len: usize, field: &str) -> Result<()> {
    if span.start >= span.end {
        return Err(Error::validation(
            field,
            format!("start {} must be < end {}", span.start, span.end),
        ));
    }
    if span.end > text_len {
        return Err(Error::validation(
            field,
            format!("end {} exceeds text length {}", span.end, text_len),
        ));
    }
    Ok(())
}

/// Predicted spans for one record, mirroring the gold label shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    #[serde(default, deserialize_with = "id_to_string")]
    pub id: Option<String>,
    #[serde(rename = "hard_labels")]
    pub hard_spans: Vec<CharSpan>,
    #[serde(rename = "soft_labels")]
    pub soft_spans: Vec<SoftLabel>,
}

impl PredictionSet {
    pub fn empty(id: Option<String>) -> Self {
        PredictionSet {
            id,
            hard_spans: Vec::new(),
            soft_spans: Vec::new(),
        }
    }

    /// Check the type's structural invariants: each list sorted and
    /// non-overlapping, probabilities in range, and every hard span present
    /// among the soft spans.
    pub fn validate(&self) -> Result<()> {
        check_sorted_disjoint(&self.hard_spans, "hard_labels")?;
        let soft: Vec<CharSpan> = self.soft_spans.iter().map(|l| l.span()).collect();
        check_sorted_disjoint(&soft, "soft_labels")?;
        for (i, label) in self.soft_spans.iter().enumerate() {
            if !(0.0..=1.0).contains(&label.prob) {
                return Err(Error::validation(
                    format!("soft_labels[{i}].prob"),
                    format!("probability {} outside [0, 1]", label.prob),
                ));
            }
        }
        for (i, span) in self.hard_spans.iter().enumerate() {
            if !soft.contains(span) {
                return Err(Error::validation(
                    format!("hard_labels[{i}]"),
                    "hard span missing from soft_labels".to_string(),
                ));
            }
        }
        Ok(())
    }
}

fn check_sorted_disjoint(spans: &[CharSpan], field: &str) -> Result<()> {
    for (i, span) in spans.iter().enumerate() {
        if span.is_empty() {
            return Err(Error::validation(
                format!("{field}[{i}]"),
                format!("start {} must be < end {}", span.start, span.end),
            ));
        }
        if i > 0 {
            let prev = &spans[i - 1];
            if span.start < prev.start {
                return Err(Error::validation(
                    format!("{field}[{i}]"),
                    "spans not sorted by start".to_string(),
                ));
            }
            if span.start < prev.end {
                return Err(Error::validation(
                    format!("{field}[{i}]"),
                    format!(
                        "span ({}, {}) overlaps previous ({}, {})",
                        span.start, span.end, prev.start, prev.end
                    ),
                ));
            }
        }
    }
    Ok(())
}

/// Serialize a prediction as one JSONL line (no trailing newline).
pub fn serialize_prediction(p: &PredictionSet) -> String {
    serde_json::to_string(p).expect("prediction sets are always serializable")
}

/// Parse one JSONL prediction line and check its invariants.
pub fn parse_prediction(line: &str) -> Result<PredictionSet> {
    let p: PredictionSet = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: e.line(),
        byte_offset: e.column().saturating_sub(1),
        message: e.to_string(),
    })?;
    p.validate()?;
    Ok(p)
}

fn default_match_cap() -> usize {
    3
}

/// Every tunable knob of the detector.
///
/// `window_size`, `stride`, and `min_span_length` are in tokens; the
/// thresholds and weights are unitless in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub window_size: usize,
    pub stride: usize,
    pub similarity_threshold: Score,
    pub alpha: Score,
    pub beta: Score,
    pub gamma: Score,
    pub score_threshold: Score,
    pub min_span_length: usize,
    pub boundary_threshold: Score,
    pub sample_count: usize,
    /// Per-sample cap on retained matches, so near-duplicate spans from one
    /// sample cannot distort the lexical frequency distribution.
    #[serde(default = "default_match_cap")]
    pub match_cap: usize,
}

impl Default for DetectionConfig {
    /// The English configuration; see [`DetectionConfig::for_language`].
    fn default() -> Self {
        DetectionConfig {
            window_size: 5,
            stride: 3,
            similarity_threshold: 0.4,
            alpha: 0.4,
            beta: 0.4,
            gamma: 0.2,
            score_threshold: 0.5,
            min_span_length: 3,
            boundary_threshold: 0.3,
            sample_count: 20,
            match_cap: default_match_cap(),
        }
    }
}

/// Languages with tuned settings, as (code, w, t, lambda); the remaining
/// fields are shared across languages.
const TUNED: &[(&str, usize, usize, Score)] = &[
    ("ar", 4, 2, 0.6),
    ("de", 4, 2, 0.6),
    ("en", 5, 3, 0.5),
    ("es", 4, 2, 0.6),
    ("fi", 4, 3, 0.6),
    ("fr", 4, 2, 0.6),
    ("hi", 5, 2, 0.6),
    ("it", 4, 2, 0.7),
    ("sv", 4, 2, 0.5),
    ("zh", 7, 3, 0.6),
];

/// Untuned languages borrow the closest tuned language's settings.
const APPROXIMATED: &[(&str, &str)] = &[("ca", "es"), ("cs", "de"), ("eu", "es"), ("fa", "ar")];

impl DetectionConfig {
    /// Tuned settings for a language code. The second element names the
    /// language whose settings were borrowed when `lang` itself has none.
    pub fn for_language(lang: &str) -> (DetectionConfig, Option<&'static str>) {
        let lang = lang.to_ascii_lowercase();
        if let Some(&(code, w, t, lambda)) = TUNED.iter().find(|(code, ..)| *code == lang) {
            return (Self::tuned_row(code, w, t, lambda), None);
        }
        let source = APPROXIMATED
            .iter()
            .find(|(code, _)| *code == lang)
            .map(|&(_, src)| src)
            .unwrap_or("en");
        let &(code, w, t, lambda) = TUNED
            .iter()
            .find(|(code, ..)| *code == source)
            .expect("approximation sources are tuned");
        (Self::tuned_row(code, w, t, lambda), Some(source))
    }

    fn tuned_row(_code: &str, w: usize, t: usize, lambda: Score) -> DetectionConfig {
        DetectionConfig {
            window_size: w,
            stride: t,
            score_threshold: lambda,
            ..DetectionConfig::default()
        }
    }
}

/// Return `c` unchanged if every invariant holds; otherwise an error naming
/// the first violated field.
pub fn validate_config(c: DetectionConfig) -> Result<DetectionConfig> {
    if c.window_size < 1 {
        return Err(Error::config("window_size", "must be >= 1"));
    }
    if c.stride < 1 {
        return Err(Error::config("stride", "must be >= 1"));
    }
    if c.stride > c.window_size {
        return Err(Error::config(
            "stride",
            format!(
                "stride {} exceeds window_size {}; windows must tile the text",
                c.stride, c.window_size
            ),
        ));
    }
    check_unit_interval(c.similarity_threshold, "similarity_threshold")?;
    check_unit_interval(c.score_threshold, "score_threshold")?;
    check_unit_interval(c.boundary_threshold, "boundary_threshold")?;
    for (value, field) in [(c.alpha, "alpha"), (c.beta, "beta"), (c.gamma, "gamma")] {
        if value < 0.0 {
            return Err(Error::config(field, format!("weight {value} is negative")));
        }
    }
    let sum = c.alpha + c.beta + c.gamma;
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(
            "alpha+beta+gamma",
            format!("weights must sum to 1, got {sum}"),
        ));
    }
    if c.min_span_length < 1 {
        return Err(Error::config("min_span_length", "must be >= 1"));
    }
    if c.sample_count < 1 {
        return Err(Error::config("sample_count", "must be >= 1"));
    }
    if c.match_cap < 1 {
        return Err(Error::config("match_cap", "must be >= 1"));
    }
    Ok(c)
}

fn check_unit_interval(value: Score, field: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::config(field, format!("{value} outside [0, 1]")));
    }
    Ok(())
}

/// How a sample set was obtained: endpoint identity plus the decoding
/// parameters actually sent (after any downgrades).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SampleProvenance {
    pub endpoint: String,
    #[serde(default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub parameters: serde_json::Map<String, serde_json::Value>,
    /// Parameters the endpoint rejected and were omitted on retry.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub downgraded: Vec<String>,
}

/// Ordered stochastic completions for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<String>,
    #[serde(default)]
    pub provenance: SampleProvenance,
}

impl SampleSet {
    pub fn new(samples: Vec<String>, provenance: SampleProvenance) -> Self {
        SampleSet {
            samples,
            provenance,
        }
    }

    /// Sample set with a fixed provenance tag and no decoding parameters,
    /// for inline/offline sources.
    pub fn from_texts(samples: Vec<String>, endpoint: impl Into<String>) -> Self {
        SampleSet {
            samples,
            provenance: SampleProvenance {
                endpoint: endpoint.into(),
                ..SampleProvenance::default()
            },
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
