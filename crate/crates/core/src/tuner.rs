//! Per-language grid search over detection hyperparameters on gold-labeled
//! validation records.
//!
//! The grid is exhaustive: candidate lists stay small and the tuned values
//! live on coarse grids anyway. Window/match/embedding work is shared across
//! every grid point with the same (window_size, stride); only refinement and
//! thresholding re-run per point.

use crate::datamodel::{DetectionConfig, Record, SampleSet};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate_record, CorrelationKind};
use crate::num::mean;
use crate::pipeline::{analyze_record, detect_from_analysis, RecordAnalysis};
use crate::scorer::EmbeddingProvider;
use crate::Score;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// What grid search optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Mean char-level IoU across records (the default; correlation is still
    /// reported).
    #[default]
    MeanIou,
    MeanCor,
    /// `iou_weight * mean IoU + cor_weight * mean Cor`.
    Weighted {
        iou_weight: Score,
        cor_weight: Score,
    },
}

/// Candidate lists for the tunable parameters, plus the fixed base config
/// supplying everything the grid does not vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub lang: String,
    pub window_sizes: Vec<usize>,
    pub strides: Vec<usize>,
    pub score_thresholds: Vec<Score>,
    pub min_span_lengths: Vec<usize>,
    pub boundary_thresholds: Vec<Score>,
    /// Opt-in scoring-weight tuning: (alpha, beta, gamma) candidates. The
    /// fixed defaults stay in place when empty.
    pub weights: Vec<(Score, Score, Score)>,
    pub objective: Objective,
    pub base: DetectionConfig,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            lang: "en".into(),
            window_sizes: (3..=8).collect(),
            strides: (1..=4).collect(),
            score_thresholds: vec![0.4, 0.5, 0.6, 0.7],
            min_span_lengths: vec![2, 3, 4],
            boundary_thresholds: vec![0.2, 0.3, 0.4],
            weights: Vec::new(),
            objective: Objective::MeanIou,
            base: DetectionConfig::default(),
        }
    }
}

impl GridSpec {
    pub fn for_language(lang: &str) -> Self {
        let (base, _) = DetectionConfig::for_language(lang);
        GridSpec {
            lang: lang.to_string(),
            base,
            ..GridSpec::default()
        }
    }

    /// Every valid grid point, in canonical nesting order.
    pub fn configs(&self) -> Vec<DetectionConfig> {
        let weight_choices: Vec<(Score, Score, Score)> = if self.weights.is_empty() {
            vec![(self.base.alpha, self.base.beta, self.base.gamma)]
        } else {
            self.weights.clone()
        };
        let mut out = Vec::new();
        for &w in &self.window_sizes {
            for &t in &self.strides {
                for &lambda in &self.score_thresholds {
                    for &msl in &self.min_span_lengths {
                        for &bt in &self.boundary_thresholds {
                            for &(alpha, beta, gamma) in &weight_choices {
                                let candidate = DetectionConfig {
                                    window_size: w,
                                    stride: t,
                                    score_threshold: lambda,
                                    min_span_length: msl,
                                    boundary_threshold: bt,
                                    alpha,
                                    beta,
                                    gamma,
                                    ..self.base.clone()
                                };
                                if let Ok(valid) = crate::datamodel::validate_config(candidate) {
                                    out.push(valid);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Objective value of one config over the evaluated records.
fn objective_value(
    records: &[(String, Record)],
    analyses: &[RecordAnalysis],
    cfg: &DetectionConfig,
    objective: Objective,
) -> Result<Score> {
    let mut ious = Vec::with_capacity(records.len());
    let mut cors = Vec::new();
    for ((id, record), analysis) in records.iter().zip(analyses) {
        let prediction = detect_from_analysis(analysis, cfg, Some(id.clone()));
        let eval = evaluate_record(record, &prediction, id, CorrelationKind::Spearman)?;
        ious.push(eval.iou);
        if eval.cor_defined {
            cors.push(eval.cor);
        }
    }
    let mean_iou = mean(&ious).unwrap_or(0.0);
    let mean_cor = mean(&cors).unwrap_or(0.0);
    Ok(match objective {
        Objective::MeanIou => mean_iou,
        Objective::MeanCor => mean_cor,
        Objective::Weighted {
            iou_weight,
            cor_weight,
        } => iou_weight * mean_iou + cor_weight * mean_cor,
    })
}

/// Ranked grid search: every valid grid point evaluated with the full detect
/// pipeline against gold labels, best objective first. Ties prefer the more
/// parsimonious config (smaller window, smaller stride, larger threshold).
pub fn grid_search(
    records: &[(String, Record)],
    samples: &BTreeMap<String, SampleSet>,
    grid: &GridSpec,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<(DetectionConfig, Score)>> {
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(Error::config("grid", "no valid grid points"));
    }
    if records.is_empty() {
        return Err(Error::validation("records", "no records to tune on"));
    }
    let unlabeled: Vec<&str> = records
        .iter()
        .filter(|(_, r)| r.hard_labels.is_empty() && r.soft_labels.is_empty())
        .map(|(id, _)| id.as_str())
        .collect();
    if !unlabeled.is_empty() {
        return Err(Error::validation(
            "records",
            format!("records lacking gold labels: {unlabeled:?}"),
        ));
    }
    for (id, _) in records {
        if !samples.contains_key(id) {
            return Err(Error::MissingSamples(id.clone()));
        }
    }

    // Group by (window_size, stride): analyses are identical within a group.
    let mut groups: BTreeMap<(usize, usize), Vec<DetectionConfig>> = BTreeMap::new();
    for cfg in configs {
        groups
            .entry((cfg.window_size, cfg.stride))
            .or_default()
            .push(cfg);
    }

    let mut scored: Vec<(DetectionConfig, Score)> = Vec::new();
    for ((_, _), group) in groups {
        let probe = &group[0];
        let analyses: Vec<RecordAnalysis> = records
            .iter()
            .map(|(id, record)| {
                analyze_record(record, &samples[id], probe, provider).map_err(|e| Error::Scoring {
                    context: format!("record {id}"),
                    message: e.to_string(),
                })
            })
            .collect::<Result<_>>()?;
        for cfg in group {
            let value = objective_value(records, &analyses, &cfg, grid.objective)?;
            scored.push((cfg, value));
        }
    }

    scored.sort_by(|(ca, va), (cb, vb)| {
        vb.partial_cmp(va)
            .unwrap()
            .then(ca.window_size.cmp(&cb.window_size))
            .then(ca.stride.cmp(&cb.stride))
            .then(cb.score_threshold.partial_cmp(&ca.score_threshold).unwrap())
            .then(ca.min_span_length.cmp(&cb.min_span_length))
            .then(
                ca.boundary_threshold
                    .partial_cmp(&cb.boundary_threshold)
                    .unwrap(),
            )
    });
    Ok(scored)
}

/// Config for a language the grid never saw: the nearest tuned language's
/// settings, with a note saying which one was borrowed.
pub fn approximate_config(lang: &str) -> (DetectionConfig, String) {
    let (cfg, source) = DetectionConfig::for_language(lang);
    let note = match source {
        Some(src) => format!("no validation data for {lang:?}; borrowed settings from {src:?}"),
        None => format!("tuned settings for {lang:?}"),
    };
    (cfg, note)
}

/// Plain-text leaderboard of the top grid points.
pub fn render_leaderboard(lang: &str, ranked: &[(DetectionConfig, Score)], limit: usize) -> String {
    let mut out = format!(
        "{lang}: {:>3} {:>3} {:>6} {:>4} {:>5} {:>10}\n",
        "w", "t", "lambda", "MSL", "BT", "objective"
    );
    for (cfg, value) in ranked.iter().take(limit) {
        out.push_str(&format!(
            "{}  {:>3} {:>3} {:>6.2} {:>4} {:>5.2} {:>10.4}\n",
            " ".repeat(lang.len()),
            cfg.window_size,
            cfg.stride,
            cfg.score_threshold,
            cfg.min_span_length,
            cfg.boundary_threshold,
            value
        ));
    }
    out
}
