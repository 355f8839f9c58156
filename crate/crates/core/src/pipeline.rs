//! End-to-end detection for one record: window the answer, match each window
//! against the sampled responses, score, refine, merge, threshold.
//!
//! The expensive half (windowing, matching, embedding similarities) depends
//! only on the window/stride/similarity settings, so it is exposed separately
//! as [`analyze_record`]; [`detect_from_analysis`] applies the remaining
//! config (weights, thresholds, refinement) and is cheap to re-run, which the
//! tuner exploits across grid points.

use crate::datamodel::{DetectionConfig, PredictionSet, Record, SampleSet};
use crate::error::{Error, Result};
use crate::matcher::{find_matches, MatchSet};
use crate::refiner::{finalize, merge_overlapping, refine_boundaries, ScoredSpan};
use crate::scorer::{score_window_from_sims, EmbeddingProvider};
use crate::segmenter::{enumerate_windows, segment_samples, tokenize, TokenizedText, WindowSpan};
use crate::Score;
use std::collections::BTreeMap;

/// One answer window with its matches and embedding similarities.
#[derive(Debug, Clone)]
pub struct WindowAnalysis {
    pub window: WindowSpan,
    pub matches: MatchSet,
    /// Cosine similarity per retained match, in match order.
    pub sims: Vec<Score>,
}

/// Everything about a record that does not depend on score weights or
/// thresholds.
#[derive(Debug, Clone)]
pub struct RecordAnalysis {
    pub tokens: TokenizedText,
    pub windows: Vec<WindowAnalysis>,
    /// Actual number of samples the record was checked against; the
    /// frequency score divides by this.
    pub sample_count: usize,
}

/// Window, match, and embed a record against its samples. The provider is
/// called once with every text the record needs.
pub fn analyze_record(
    record: &Record,
    samples: &SampleSet,
    cfg: &DetectionConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<RecordAnalysis> {
    let tokens = tokenize(&record.model_output_text, &record.lang);
    let windows = enumerate_windows(&tokens, cfg.window_size, cfg.stride)?;
    let pool = segment_samples(samples, &record.lang, cfg.window_size, cfg.stride)?;

    let match_sets: Vec<MatchSet> = windows
        .iter()
        .map(|w| find_matches(w, &pool, cfg.similarity_threshold, cfg.match_cap))
        .collect();

    // One provider call per record: every window text and matched span text
    // that actually needs an embedding (two or more matches).
    let mut text_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut texts: Vec<String> = Vec::new();
    for (window, ms) in windows.iter().zip(&match_sets) {
        if ms.len() < 2 {
            continue;
        }
        for text in std::iter::once(window.text.as_str())
            .chain(ms.matches.iter().map(|m| m.window.text.as_str()))
        {
            if !text_ids.contains_key(text) {
                text_ids.insert(text.to_string(), texts.len());
                texts.push(text.to_string());
            }
        }
    }
    let vectors = if texts.is_empty() {
        Vec::new()
    } else {
        provider.embed_batch(&texts).map_err(|e| Error::Scoring {
            context: format!("record {}", record.id.as_deref().unwrap_or("<unnamed>")),
            message: e.to_string(),
        })?
    };

    let analyses = windows
        .into_iter()
        .zip(match_sets)
        .map(|(window, matches)| {
            let sims = if matches.len() < 2 {
                vec![0.0; matches.len()]
            } else {
                let source = &vectors[text_ids[window.text.as_str()]];
                matches
                    .matches
                    .iter()
                    .map(|m| source.cosine(&vectors[text_ids[m.window.text.as_str()]]))
                    .collect()
            };
            WindowAnalysis {
                window,
                matches,
                sims,
            }
        })
        .collect();

    Ok(RecordAnalysis {
        tokens,
        windows: analyses,
        sample_count: samples.len(),
    })
}

/// Per-character profile: each character takes the max combined score over
/// the windows covering it.
fn char_score_profile(analysis: &RecordAnalysis, scores: &[Score]) -> Vec<Score> {
    let mut profile = vec![0.0; analysis.tokens.char_len()];
    for (wa, &score) in analysis.windows.iter().zip(scores) {
        for c in profile
            .iter_mut()
            .take(wa.window.span.end)
            .skip(wa.window.span.start)
        {
            *c = Score::max(*c, score);
        }
    }
    profile
}

/// Apply scoring weights, boundary refinement, merging, and thresholds to a
/// precomputed analysis.
pub fn detect_from_analysis(
    analysis: &RecordAnalysis,
    cfg: &DetectionConfig,
    id: Option<String>,
) -> PredictionSet {
    if analysis.windows.is_empty() {
        return PredictionSet::empty(id);
    }
    // Frequency support is measured against the samples actually present.
    let scoring_cfg = DetectionConfig {
        sample_count: analysis.sample_count.max(1),
        ..cfg.clone()
    };
    let combined: Vec<Score> = analysis
        .windows
        .iter()
        .map(|wa| score_window_from_sims(&wa.window, &wa.matches, &wa.sims, &scoring_cfg).combined)
        .collect();
    let profile = char_score_profile(analysis, &combined);
    let spans: Vec<ScoredSpan> = analysis
        .windows
        .iter()
        .zip(&combined)
        .map(|(wa, &score)| ScoredSpan::new(wa.window.span, score))
        .collect();
    let refined = refine_boundaries(&spans, &analysis.tokens, &profile, cfg);
    let merged = merge_overlapping(refined);
    finalize(merged, cfg, &analysis.tokens, id)
}

/// Full detection for one record.
pub fn detect_record(
    record: &Record,
    samples: &SampleSet,
    cfg: &DetectionConfig,
    provider: &dyn EmbeddingProvider,
    id: Option<String>,
) -> Result<PredictionSet> {
    let analysis = analyze_record(record, samples, cfg, provider)?;
    Ok(detect_from_analysis(&analysis, cfg, id))
}
