//! Lexical matching between answer windows and sample windows.
//!
//! Similarity is the Ratcliff/Obershelp ratio `2*M / (|a| + |b|)` where `M`
//! is the total length of matching blocks found by recursive
//! longest-common-substring decomposition, computed over case-folded
//! character sequences. A window's match set keeps every pool span strictly
//! above the similarity threshold, capped per sample.

use crate::segmenter::WindowSpan;
use crate::Score;

/// One retained sample span.
#[derive(Debug, Clone, PartialEq)]
pub struct Match {
    pub sample_index: usize,
    pub window: WindowSpan,
    pub similarity: Score,
}

/// All sample spans matched to one answer window.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub source: WindowSpan,
    /// Sorted by (sample index, char start, char end).
    pub matches: Vec<Match>,
    /// Number of DISTINCT samples contributing at least one match.
    pub matched_sample_count: usize,
}

impl MatchSet {
    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }
}

fn fold_chars(s: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(s.len());
    out.extend(s.chars().flat_map(|c| c.to_lowercase()));
    out
}

/// Ratcliff/Obershelp similarity ratio in `[0, 1]`. Two empty strings are
/// defined as identical (ratio 1). Case-folded before matching, so casing
/// differences across samples do not count as disagreement.
pub fn sequence_similarity(a: &str, b: &str) -> Score {
    ratio(&fold_chars(a), &fold_chars(b))
}

pub(crate) fn ratio(a: &[char], b: &[char]) -> Score {
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * total_matched(a, b) as Score / total as Score
}

/// Total length of matching blocks: find the longest common substring, then
/// recurse on the pieces before and after it on both sides.
fn total_matched(a: &[char], b: &[char]) -> usize {
    let mut row = vec![0usize; b.len()];
    matched_between(a, b, 0, a.len(), 0, b.len(), &mut row)
}

fn matched_between(
    a: &[char],
    b: &[char],
    a0: usize,
    a1: usize,
    b0: usize,
    b1: usize,
    row: &mut [usize],
) -> usize {
    if a0 >= a1 || b0 >= b1 {
        return 0;
    }
    let (ai, bi, len) = longest_common_block(a, b, a0, a1, b0, b1, row);
    if len == 0 {
        return 0;
    }
    len + matched_between(a, b, a0, ai, b0, bi, row)
        + matched_between(a, b, ai + len, a1, bi + len, b1, row)
}

/// Longest common substring of `a[a0..a1]` and `b[b0..b1]`; ties resolved to
/// the earliest start in `a`, then the earliest start in `b`. Returns
/// (a start, b start, length). `row` is caller-provided scratch of len >= b1.
fn longest_common_block(
    a: &[char],
    b: &[char],
    a0: usize,
    a1: usize,
    b0: usize,
    b1: usize,
    row: &mut [usize],
) -> (usize, usize, usize) {
    for r in row[b0..b1].iter_mut() {
        *r = 0;
    }
    let mut best = (a0, b0, 0usize);
    for (i, &ca) in a.iter().enumerate().take(a1).skip(a0) {
        let mut prev = 0;
        for (j, &cb) in b.iter().enumerate().take(b1).skip(b0) {
            let cur = if ca == cb { prev + 1 } else { 0 };
            prev = row[j];
            row[j] = cur;
            // Strict '>' keeps the first maximal block, which is the one with
            // the earliest end (hence earliest start) in a, then in b.
            if cur > best.2 {
                best = (i + 1 - cur, j + 1 - cur, cur);
            }
        }
    }
    best
}

/// Filter the candidate pool down to this window's match set: similarity
/// strictly greater than `tau`, at most `match_cap` spans per sample (highest
/// similarity first, ties to the earlier char start).
pub fn find_matches(
    win: &WindowSpan,
    pool: &[(usize, WindowSpan)],
    tau: Score,
    match_cap: usize,
) -> MatchSet {
    let source_chars = fold_chars(&win.text);
    let mut candidates: Vec<Match> = pool
        .iter()
        .filter_map(|(sample_index, window)| {
            let similarity = ratio(&source_chars, &fold_chars(&window.text));
            (similarity > tau).then(|| Match {
                sample_index: *sample_index,
                window: window.clone(),
                similarity,
            })
        })
        .collect();

    // Rank within each sample and apply the cap.
    candidates.sort_by(|x, y| {
        x.sample_index
            .cmp(&y.sample_index)
            .then(y.similarity.partial_cmp(&x.similarity).unwrap())
            .then(x.window.span.start.cmp(&y.window.span.start))
            .then(x.window.span.end.cmp(&y.window.span.end))
    });
    let mut matches: Vec<Match> = Vec::new();
    let mut kept_in_sample = 0;
    for m in candidates {
        if matches.last().map(|p| p.sample_index) == Some(m.sample_index) {
            if kept_in_sample >= match_cap {
                continue;
            }
        } else {
            kept_in_sample = 0;
        }
        kept_in_sample += 1;
        matches.push(m);
    }

    // Canonical order for deterministic downstream scoring.
    matches.sort_by(|x, y| {
        (x.sample_index, x.window.span.start, x.window.span.end).cmp(&(
            y.sample_index,
            y.window.span.start,
            y.window.span.end,
        ))
    });
    let mut sample_ids: Vec<usize> = matches.iter().map(|m| m.sample_index).collect();
    sample_ids.dedup();
    MatchSet {
        source: win.clone(),
        matched_sample_count: sample_ids.len(),
        matches,
    }
}
