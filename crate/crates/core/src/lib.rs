//! hallumark: zero-training, black-box hallucination span detection.
//!
//! The detector flags character-level spans of an LLM answer by measuring how
//! consistently the answer's content recurs across stochastically sampled
//! alternative answers. Each sliding-window span of the answer is matched
//! against sample spans by sequence similarity; disagreement is scored as a
//! weighted sum of semantic entropy (over embedding similarities), lexical
//! entropy (over surface forms), and a frequency term (how many samples have
//! no match at all). Window scores become spans through boundary refinement,
//! overlap merging, and thresholding.
//!
//! The crate also carries the task harness around the detector: JSONL record
//! parsing, character-level IoU/correlation evaluation with mark-all and
//! mark-none baselines, a sampling client with an on-disk cache, a
//! per-language hyperparameter grid search, and the `hallumark` CLI over all
//! of it.

pub mod cli;
pub mod datamodel;
pub mod error;
pub mod evaluator;
pub mod matcher;
pub mod num;
pub mod pipeline;
pub mod refiner;
pub mod sampler;
pub mod scorer;
pub mod segmenter;
pub mod tuner;

/// Scalar type every score, threshold, and weight is computed in. The numeric
/// kernels in [`num`] stay generic over `num_traits::Float`; the pipeline
/// instantiates them here.
pub type Score = f64;

pub use datamodel::{
    parse_prediction, parse_record, serialize_prediction, validate_config, CharSpan,
    DetectionConfig, PredictionSet, Record, SampleSet, SoftLabel,
};
pub use error::{Error, Result};
pub use evaluator::{baseline_mark_all, baseline_mark_none, char_correlation, char_iou};
pub use matcher::{find_matches, sequence_similarity, MatchSet};
pub use pipeline::{analyze_record, detect_from_analysis, detect_record};
pub use refiner::{finalize, merge_overlapping, refine_boundaries, ScoredSpan};
pub use sampler::{generate_samples, load_offline_samples, SampleCache, SamplingProfile};
pub use scorer::{
    combined_score, deterministic_stub_provider, frequency_score, lexical_entropy,
    semantic_entropy, EmbeddingProvider, EmbeddingVector,
};
pub use segmenter::{enumerate_windows, segment_samples, tokenize, TokenizedText, WindowSpan};
pub use tuner::{grid_search, GridSpec, Objective};
