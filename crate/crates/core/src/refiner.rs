//! From per-window scores to final spans: boundary refinement, overlap
//! merging, minimum-length filtering, and thresholding.
//!
//! Boundary refinement snaps span edges outward to token boundaries, then
//! slides each edge (within `ceil(BT * w)` tokens) to the position with the
//! steepest contrast between the mean per-character score on its two sides.
//! Edges never cross phrase-boundary punctuation and never split a run of
//! entity-like tokens (consecutive capitalized or digit-bearing tokens).
//!
//! Spans whose character overlap reaches 50% of the shorter span are merged
//! to their hull, scored by the length-weighted mean of the constituent
//! scores (original lengths), repeated to a fixed point.

use crate::datamodel::{CharSpan, DetectionConfig, PredictionSet, SoftLabel};
use crate::segmenter::TokenizedText;
use crate::Score;

/// Sub-threshold spans below this probability are dropped from the soft
/// output; they carry no signal for the correlation metric.
pub const SOFT_PROB_FLOOR: Score = 0.1;

/// A candidate hallucination span with its combined score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSpan {
    pub span: CharSpan,
    pub score: Score,
    /// How many original windows contributed to this span.
    pub origin_windows: usize,
    // Length-weighted accumulators so repeated merging keeps using the
    // original constituent lengths.
    weight: Score,
    weighted_score: Score,
}

impl ScoredSpan {
    pub fn new(span: CharSpan, score: Score) -> Self {
        let weight = span.len() as Score;
        ScoredSpan {
            span,
            score,
            origin_windows: 1,
            weight,
            weighted_score: score * weight,
        }
    }

    fn absorb(&mut self, other: &ScoredSpan) {
        self.span = self.span.hull(&other.span);
        self.weight += other.weight;
        self.weighted_score += other.weighted_score;
        self.origin_windows += other.origin_windows;
        self.score = self.weighted_score / self.weight;
    }
}

fn is_phrase_boundary(c: char) -> bool {
    matches!(
        c,
        '.' | ','
            | ';'
            | ':'
            | '!'
            | '?'
            | '"'
            | '\''
            | '('
            | ')'
            | '['
            | ']'
            | '{'
            | '}'
            | '\u{201c}' // “
            | '\u{201d}' // ”
            | '\u{2018}' // ‘
            | '\u{2019}' // ’
            | '\u{00ab}' // «
            | '\u{00bb}' // »
            | '\u{3001}' // 、
            | '\u{3002}' // 。
            | '\u{ff01}' // ！
            | '\u{ff0c}' // ，
            | '\u{ff1a}' // ：
            | '\u{ff1b}' // ；
            | '\u{ff1f}' // ？
            | '\u{300c}' // 「
            | '\u{300d}' // 」
    )
}

fn is_entity_like(token: &str) -> bool {
    token.chars().next().is_some_and(|c| c.is_uppercase())
        || token.chars().any(|c| c.is_ascii_digit())
}

/// Char hulls of maximal runs of two or more entity-like tokens; edges may
/// not land strictly inside one.
fn entity_runs(tt: &TokenizedText) -> Vec<CharSpan> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < tt.tokens.len() {
        if is_entity_like(&tt.tokens[i].text) {
            let mut j = i;
            while j + 1 < tt.tokens.len() && is_entity_like(&tt.tokens[j + 1].text) {
                j += 1;
            }
            if j > i {
                runs.push(CharSpan::new(tt.tokens[i].start, tt.tokens[j].end));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    runs
}

struct EdgeContext<'a> {
    chars: Vec<char>,
    prefix: Vec<Score>, // prefix sums of char_scores
    boundaries: Vec<usize>,
    runs: Vec<CharSpan>,
    tt: &'a TokenizedText,
    radius: usize,
}

impl<'a> EdgeContext<'a> {
    fn new(tt: &'a TokenizedText, char_scores: &[Score], cfg: &DetectionConfig) -> Self {
        let mut prefix = Vec::with_capacity(char_scores.len() + 1);
        prefix.push(0.0);
        for &s in char_scores {
            prefix.push(prefix.last().unwrap() + s);
        }
        let mut boundaries: Vec<usize> = tt.tokens.iter().flat_map(|t| [t.start, t.end]).collect();
        boundaries.sort_unstable();
        boundaries.dedup();
        EdgeContext {
            chars: tt.text.chars().collect(),
            prefix,
            boundaries,
            runs: entity_runs(tt),
            tt,
            radius: (cfg.boundary_threshold * cfg.window_size as Score).ceil() as usize,
        }
    }

    fn mean_over(&self, lo: usize, hi: usize) -> Score {
        debug_assert!(lo < hi && hi <= self.chars.len());
        (self.prefix[hi] - self.prefix[lo]) / (hi - lo) as Score
    }

    /// Mean char score over the hull of up to `radius` tokens immediately
    /// left of boundary `c`; `None` when no token lies left of it.
    fn left_mean(&self, c: usize) -> Option<Score> {
        let count = self.tt.tokens.partition_point(|t| t.end <= c);
        if count == 0 || self.radius == 0 {
            return None;
        }
        let first = &self.tt.tokens[count.saturating_sub(self.radius)];
        Some(self.mean_over(first.start, c))
    }

    /// Mean char score over the hull of up to `radius` tokens immediately
    /// right of boundary `c`; `None` when no token lies right of it.
    fn right_mean(&self, c: usize) -> Option<Score> {
        let idx = self.tt.tokens.partition_point(|t| t.start < c);
        if idx >= self.tt.tokens.len() || self.radius == 0 {
            return None;
        }
        let last = &self.tt.tokens[(idx + self.radius - 1).min(self.tt.tokens.len() - 1)];
        Some(self.mean_over(c, last.end))
    }

    /// Edge-contrast proxy: mean score inside the span minus mean score
    /// outside, each over a `radius`-token horizon next to the candidate
    /// edge. A candidate with no tokens on one side contributes 0, so text
    /// edges never win on a flat profile.
    fn gradient(&self, c: usize, is_start: bool) -> Score {
        let (inside, outside) = if is_start {
            (self.right_mean(c), self.left_mean(c))
        } else {
            (self.left_mean(c), self.right_mean(c))
        };
        match (inside, outside) {
            (Some(i), Some(o)) => i - o,
            _ => 0.0,
        }
    }

    /// Snap outward to the nearest token boundary: down for a start edge, up
    /// for an end edge.
    fn snap(&self, pos: usize, is_start: bool) -> usize {
        if self.boundaries.is_empty() {
            return pos;
        }
        if self.boundaries.binary_search(&pos).is_ok() {
            return pos;
        }
        if is_start {
            match self.boundaries.iter().rev().find(|&&b| b < pos) {
                Some(&b) => b,
                None => self.boundaries[0],
            }
        } else {
            match self.boundaries.iter().find(|&&b| b > pos) {
                Some(&b) => b,
                None => *self.boundaries.last().unwrap(),
            }
        }
    }

    fn inside_run(&self, pos: usize) -> Option<&CharSpan> {
        self.runs.iter().find(|r| pos > r.start && pos < r.end)
    }

    /// True when some phrase-boundary character sits between `from` and `to`.
    fn crosses_phrase(&self, from: usize, to: usize) -> bool {
        let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
        self.chars[lo..hi].iter().any(|&c| is_phrase_boundary(c))
    }

    /// First token whose end reaches `pos`, clamped to the last token.
    fn anchor_token(&self, pos: usize) -> usize {
        self.tt
            .tokens
            .iter()
            .position(|t| t.end >= pos)
            .unwrap_or(self.tt.tokens.len().saturating_sub(1))
    }

    /// Candidate edge positions around the snapped edge, after the phrase,
    /// entity-run, and crossing constraints.
    fn candidates(
        &self,
        snapped: usize,
        is_start: bool,
        valid: impl Fn(usize) -> bool,
    ) -> Vec<usize> {
        let anchor = self.anchor_token(snapped);
        let lo_tok = anchor.saturating_sub(self.radius);
        let hi_tok = (anchor + self.radius).min(self.tt.tokens.len() - 1);
        let mut candidates: Vec<usize> = self.tt.tokens[lo_tok..=hi_tok]
            .iter()
            .flat_map(|t| [t.start, t.end])
            .collect();
        candidates.push(snapped);
        // A snapped edge strictly inside an entity run must escape to the
        // run's outer boundary, even beyond the search radius.
        if let Some(run) = self.inside_run(snapped) {
            candidates.push(if is_start { run.start } else { run.end });
        }
        candidates.sort_unstable();
        candidates.dedup();
        candidates.retain(|&c| {
            valid(c) && self.inside_run(c).is_none() && !self.crosses_phrase(snapped, c)
        });
        candidates
    }

    fn refine_edge(&self, pos: usize, is_start: bool, valid: impl Fn(usize) -> bool) -> usize {
        let snapped = self.snap(pos, is_start);
        if self.tt.tokens.is_empty() {
            return snapped;
        }
        let mut best = snapped;
        let mut best_gradient = Score::NEG_INFINITY;
        for c in self.candidates(snapped, is_start, valid) {
            let g = self.gradient(c, is_start);
            let better = g > best_gradient + 1e-12
                || ((g - best_gradient).abs() <= 1e-12
                    && (c.abs_diff(snapped), c) < (best.abs_diff(snapped), best));
            if better {
                best = c;
                best_gradient = g;
            }
        }
        if best_gradient == Score::NEG_INFINITY {
            snapped
        } else {
            best
        }
    }
}

/// Refine every span's edges against the per-character score profile.
/// `char_scores` must hold one value per character of the answer. Spans that
/// collapse to zero length are dropped.
pub fn refine_boundaries(
    spans: &[ScoredSpan],
    tt: &TokenizedText,
    char_scores: &[Score],
    cfg: &DetectionConfig,
) -> Vec<ScoredSpan> {
    debug_assert_eq!(char_scores.len(), tt.char_len());
    if tt.tokens.is_empty() {
        return spans.to_vec();
    }
    let ctx = EdgeContext::new(tt, char_scores, cfg);
    spans
        .iter()
        .filter(|s| !s.span.is_empty())
        .filter_map(|s| {
            // An edge may not cross the span's other edge.
            let start = ctx.refine_edge(s.span.start, true, |c| c < s.span.end);
            let end = ctx.refine_edge(s.span.end, false, |c| c > start);
            (start < end).then(|| ScoredSpan::new(CharSpan::new(start, end), s.score))
        })
        .collect()
}

fn qualifies(a: &CharSpan, b: &CharSpan) -> bool {
    let shorter = a.len().min(b.len());
    shorter > 0 && 2 * a.overlap(b) >= shorter
}

/// Merge spans overlapping by at least half the shorter span, repeatedly,
/// scoring each merged span by the length-weighted mean of its constituents.
pub fn merge_overlapping(mut spans: Vec<ScoredSpan>) -> Vec<ScoredSpan> {
    loop {
        spans.sort_by_key(|s| (s.span.start, s.span.end));
        let mut merged_any = false;
        let mut out: Vec<ScoredSpan> = Vec::with_capacity(spans.len());
        'outer: for span in spans.drain(..) {
            for existing in out.iter_mut() {
                if qualifies(&existing.span, &span.span) {
                    existing.absorb(&span);
                    merged_any = true;
                    continue 'outer;
                }
            }
            out.push(span);
        }
        spans = out;
        if !merged_any {
            break;
        }
    }
    spans.sort_by_key(|s| (s.span.start, s.span.end));
    spans
}

/// Tokens intersecting the span, the unit `min_span_length` is stated in.
fn token_length(span: &CharSpan, tt: &TokenizedText) -> usize {
    tt.tokens
        .iter()
        .filter(|t| t.start < span.end && t.end > span.start)
        .count()
}

/// Threshold merged spans into the final prediction: every span keeps its
/// score as a soft probability (above the floor), and spans strictly above
/// the score threshold with at least `min_span_length` tokens also become
/// hard spans. Residual sub-50% overlaps are resolved by giving each
/// character to its highest-scoring span; lower-scoring spans keep their
/// uncovered fragments, so the output lists are disjoint.
pub fn finalize(
    spans: Vec<ScoredSpan>,
    cfg: &DetectionConfig,
    tt: &TokenizedText,
    id: Option<String>,
) -> PredictionSet {
    let mut order = spans;
    order.retain(|s| !s.span.is_empty());
    order.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then((a.span.start, a.span.end).cmp(&(b.span.start, b.span.end)))
    });

    let mut claimed: Vec<CharSpan> = Vec::new();
    let mut disjoint: Vec<ScoredSpan> = Vec::new();
    for span in order {
        let mut cursor = span.span.start;
        let mut fragments = Vec::new();
        for c in claimed.iter().filter(|c| c.overlap(&span.span) > 0) {
            if c.start > cursor {
                fragments.push(CharSpan::new(cursor, c.start));
            }
            cursor = cursor.max(c.end);
            if cursor >= span.span.end {
                break;
            }
        }
        if cursor < span.span.end {
            fragments.push(CharSpan::new(cursor, span.span.end));
        }
        for fragment in fragments {
            let idx = claimed.partition_point(|c| c.start < fragment.start);
            claimed.insert(idx, fragment);
            let mut piece = span.clone();
            piece.span = fragment;
            disjoint.push(piece);
        }
    }
    disjoint.sort_by_key(|s| (s.span.start, s.span.end));

    let mut hard_spans = Vec::new();
    let mut soft_spans = Vec::new();
    for s in &disjoint {
        let prob = s.score.clamp(0.0, 1.0);
        let is_hard =
            prob > cfg.score_threshold && token_length(&s.span, tt) >= cfg.min_span_length;
        if is_hard {
            hard_spans.push(s.span);
        }
        if is_hard || prob >= SOFT_PROB_FLOOR {
            soft_spans.push(SoftLabel {
                start: s.span.start,
                end: s.span.end,
                prob,
            });
        }
    }
    let prediction = PredictionSet {
        id,
        hard_spans,
        soft_spans,
    };
    debug_assert!(prediction.validate().is_ok());
    prediction
}
