//! Per-window hallucination scoring: semantic entropy over embedding
//! similarities, lexical entropy over surface forms, frequency support, and
//! their weighted combination.
//!
//! Embeddings come from a pluggable [`EmbeddingProvider`]; two implementations
//! ship with the crate: an HTTP batch client and a deterministic character
//! trigram stub for offline runs and tests.
//!
//! Degenerate match sets are pinned: a window with no matches at all scores
//! maximal uncertainty on every component (no support in the samples is the
//! strongest divergence signal), and a single match carries no distribution,
//! so both entropies are zero.

use crate::datamodel::DetectionConfig;
use crate::error::{Error, Result};
use crate::matcher::MatchSet;
use crate::num::{cosine, l2_norm, l2_normalize, ln_count, shannon_entropy, softmax};
use crate::segmenter::WindowSpan;
use crate::Score;
use serde::Deserialize;
use std::collections::BTreeMap;

/// Unit-L2-norm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<Score>,
}

impl EmbeddingVector {
    /// Normalize `values` to unit length; `None` for the zero vector.
    pub fn normalized(mut values: Vec<Score>) -> Option<Self> {
        if l2_norm(&values) == 0.0 {
            return None;
        }
        l2_normalize(&mut values);
        Some(EmbeddingVector { values })
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }

    pub fn cosine(&self, other: &EmbeddingVector) -> Score {
        cosine(&self.values, &other.values)
    }
}

/// Deterministic batch embedder. Same string, same vector, within a session;
/// output length equals input length.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>>;
}

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut hash = FNV_OFFSET ^ seed;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Offline embedding surrogate: the L2-normalized histogram of hashed
/// character trigrams (fixed FNV-1a seed), over the case-folded text padded
/// with one space on each side.
#[derive(Debug, Clone)]
pub struct TrigramHashProvider {
    dimension: usize,
    seed: u64,
}

impl TrigramHashProvider {
    pub const MIN_DIMENSION: usize = 8;
    pub const DEFAULT_DIMENSION: usize = 256;

    pub fn new(dimension: usize) -> Result<Self> {
        if dimension < Self::MIN_DIMENSION {
            return Err(Error::config(
                "stub_dimension",
                format!("must be >= {}", Self::MIN_DIMENSION),
            ));
        }
        Ok(TrigramHashProvider {
            dimension,
            seed: 0x5eed_ba5e,
        })
    }

    fn embed_one(&self, text: &str) -> EmbeddingVector {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(text.chars().flat_map(|c| c.to_lowercase()))
            .chain(std::iter::once(' '))
            .collect();
        let mut histogram = vec![0.0; self.dimension];
        let mut buf = [0u8; 12];
        for gram in padded.windows(3) {
            let mut len = 0;
            for &c in gram {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            let bucket = (fnv1a(&buf[..len], self.seed) % self.dimension as u64) as usize;
            histogram[bucket] += 1.0;
        }
        EmbeddingVector::normalized(histogram).unwrap_or_else(|| {
            // No trigrams (empty text): a fixed basis vector keeps the
            // unit-norm contract.
            let mut values = vec![0.0; self.dimension];
            values[0] = 1.0;
            EmbeddingVector { values }
        })
    }
}

/// The offline testing surrogate for a sentence embedding model.
pub fn deterministic_stub_provider(dimension: usize) -> Result<TrigramHashProvider> {
    TrigramHashProvider::new(dimension)
}

impl EmbeddingProvider for TrigramHashProvider {
    fn name(&self) -> &str {
        "stub-trigram"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

#[derive(Deserialize)]
struct EmbedResponse {
    #[serde(alias = "vectors")]
    embeddings: Vec<Vec<Score>>,
}

/// HTTP batch embedding client. POSTs `{"texts": [...]}` and expects
/// `{"embeddings": [[...], ...]}` (alias `vectors`); vectors are
/// L2-normalized on receipt.
pub struct RemoteEmbeddingProvider {
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
    dimension: std::sync::Mutex<Option<usize>>,
}

impl RemoteEmbeddingProvider {
    pub fn new(url: impl Into<String>, token: Option<String>) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Provider(format!("failed to build HTTP client: {e}")))?;
        Ok(RemoteEmbeddingProvider {
            url: url.into(),
            token,
            client,
            dimension: std::sync::Mutex::new(None),
        })
    }
}

impl EmbeddingProvider for RemoteEmbeddingProvider {
    fn name(&self) -> &str {
        "remote"
    }

    /// Dimension seen on the first successful batch; 0 before that.
    fn dimension(&self) -> usize {
        self.dimension.lock().unwrap().unwrap_or(0)
    }

    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let mut request = self
            .client
            .post(&self.url)
            .json(&serde_json::json!({ "texts": texts }));
        if let Some(token) = &self.token {
            request = request.bearer_auth(token);
        }
        let response = request
            .send()
            .map_err(|e| Error::Provider(format!("request to {} failed: {e}", self.url)))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(Error::Provider(format!(
                "{} returned {status}: {body}",
                self.url
            )));
        }
        let parsed: EmbedResponse = response
            .json()
            .map_err(|e| Error::Provider(format!("malformed embedding response: {e}")))?;
        if parsed.embeddings.len() != texts.len() {
            return Err(Error::Provider(format!(
                "requested {} embeddings, got {}",
                texts.len(),
                parsed.embeddings.len()
            )));
        }
        let mut dim_guard = self.dimension.lock().unwrap();
        let mut out = Vec::with_capacity(parsed.embeddings.len());
        for values in parsed.embeddings {
            match *dim_guard {
                None => *dim_guard = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::Provider(format!(
                        "inconsistent embedding dimension: {} vs {d}",
                        values.len()
                    )));
                }
                _ => {}
            }
            let vector = EmbeddingVector::normalized(values)
                .ok_or_else(|| Error::Provider("endpoint returned a zero vector".into()))?;
            out.push(vector);
        }
        Ok(out)
    }
}

/// All component scores for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentScores {
    pub window: WindowSpan,
    pub semantic_entropy_norm: Score,
    pub lexical_entropy_norm: Score,
    pub frequency: Score,
    pub combined: Score,
}

/// Semantic entropy from precomputed window-to-match cosine similarities.
/// Returns (raw nats, normalized to `[0, 1]`).
pub fn semantic_entropy_from_sims(sims: &[Score]) -> (Score, Score) {
    match sims.len() {
        0 => (0.0, 1.0),
        1 => (0.0, 0.0),
        m => {
            let probs = softmax(sims);
            let raw = shannon_entropy(&probs);
            (raw, raw / ln_count::<Score>(m))
        }
    }
}

/// Semantic entropy of a window against its matched spans: cosine similarity
/// per match through the provider, softmax over the matched set, Shannon
/// entropy of that distribution.
pub fn semantic_entropy(
    win: &WindowSpan,
    matches: &MatchSet,
    provider: &dyn EmbeddingProvider,
) -> Result<(Score, Score)> {
    if matches.is_empty() {
        return Ok(semantic_entropy_from_sims(&[]));
    }
    let mut texts = Vec::with_capacity(matches.len() + 1);
    texts.push(win.text.clone());
    texts.extend(matches.matches.iter().map(|m| m.window.text.clone()));
    let vectors = provider.embed_batch(&texts).map_err(|e| Error::Scoring {
        context: format!("window ({}, {})", win.span.start, win.span.end),
        message: e.to_string(),
    })?;
    let (source, rest) = vectors.split_first().expect("batch is non-empty");
    let sims: Vec<Score> = rest.iter().map(|v| source.cosine(v)).collect();
    Ok(semantic_entropy_from_sims(&sims))
}

/// Case-fold and collapse runs of whitespace, so surface forms differing only
/// in casing or spacing count as the same outcome.
fn canonical_form(text: &str) -> String {
    text.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Shannon entropy of the frequency distribution of matched span surface
/// forms. Returns (raw nats, normalized to `[0, 1]`).
pub fn lexical_entropy(matches: &MatchSet) -> (Score, Score) {
    if matches.is_empty() {
        return (0.0, 1.0);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for m in &matches.matches {
        *counts.entry(canonical_form(&m.window.text)).or_insert(0) += 1;
    }
    let total = matches.len() as Score;
    let probs: Vec<Score> = counts.values().map(|&c| c as Score / total).collect();
    let raw = shannon_entropy(&probs);
    if counts.len() < 2 {
        (raw, 0.0)
    } else {
        (raw, raw / ln_count::<Score>(counts.len()))
    }
}

/// Fraction of samples with no retained match: `1 - matched_samples / n`.
pub fn frequency_score(matches: &MatchSet, sample_count: usize) -> Score {
    debug_assert!(sample_count >= 1);
    1.0 - matches.matched_sample_count as Score / sample_count as Score
}

/// Weighted combination of the three normalized components.
pub fn combined_score(
    semantic_norm: Score,
    lexical_norm: Score,
    frequency: Score,
    cfg: &DetectionConfig,
) -> Score {
    cfg.alpha * semantic_norm + cfg.beta * lexical_norm + cfg.gamma * frequency
}

/// Assemble every component for a window from precomputed similarities.
pub fn score_window_from_sims(
    win: &WindowSpan,
    matches: &MatchSet,
    sims: &[Score],
    cfg: &DetectionConfig,
) -> ComponentScores {
    debug_assert_eq!(sims.len(), matches.len());
    let (_, semantic_norm) = semantic_entropy_from_sims(sims);
    let (_, lexical_norm) = lexical_entropy(matches);
    let frequency = frequency_score(matches, cfg.sample_count);
    ComponentScores {
        window: win.clone(),
        semantic_entropy_norm: semantic_norm,
        lexical_entropy_norm: lexical_norm,
        frequency,
        combined: combined_score(semantic_norm, lexical_norm, frequency, cfg),
    }
}

/// Assemble every component for a window, calling the provider once.
pub fn score_window(
    win: &WindowSpan,
    matches: &MatchSet,
    provider: &dyn EmbeddingProvider,
    cfg: &DetectionConfig,
) -> Result<ComponentScores> {
    let (_, semantic_norm) = semantic_entropy(win, matches, provider)?;
    let (_, lexical_norm) = lexical_entropy(matches);
    let frequency = frequency_score(matches, cfg.sample_count);
    Ok(ComponentScores {
        window: win.clone(),
        semantic_entropy_norm: semantic_norm,
        lexical_entropy_norm: lexical_norm,
        frequency,
        combined: combined_score(semantic_norm, lexical_norm, frequency, cfg),
    })
}
