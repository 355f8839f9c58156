//! Tokenization and sliding-window span enumeration.
//!
//! Windows are defined over tokens (whitespace-delimited runs; single
//! characters for Chinese) and carry exact character offsets back into the
//! original text. Window `i` (1-based) covers tokens
//! `[(i-1)*stride, (i-1)*stride + window_size)`, clipped to the token list;
//! trailing partial windows are kept so the tail of the answer is analyzable.

use crate::datamodel::{CharSpan, SampleSet};
use crate::error::{Error, Result};

/// One token with character and byte offsets into the source text.
/// Byte offsets exist only so slices can be taken without re-scanning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    /// Character offsets (Unicode scalar values), start-inclusive, end-exclusive.
    pub start: usize,
    pub end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
}

/// A text together with its token decomposition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedText {
    pub text: String,
    pub tokens: Vec<Token>,
}

impl TokenizedText {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// Character length of the underlying text.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Substring by character offsets.
    pub fn slice_chars(&self, span: CharSpan) -> &str {
        let mut byte_start = self.text.len();
        let mut byte_end = self.text.len();
        let mut found_start = span.start == 0;
        if found_start {
            byte_start = 0;
        }
        for (count, (byte_idx, _)) in self.text.char_indices().enumerate() {
            if count == span.start {
                byte_start = byte_idx;
                found_start = true;
            }
            if count == span.end {
                byte_end = byte_idx;
                break;
            }
        }
        debug_assert!(found_start);
        &self.text[byte_start..byte_end]
    }
}

/// A candidate span: a token range of the answer or a sample, with its
/// character hull and the exact text slice.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpan {
    pub first_token: usize,
    pub token_count: usize,
    pub span: CharSpan,
    pub text: String,
}

fn is_chinese(lang: &str) -> bool {
    let l = lang.to_ascii_lowercase();
    l == "zh" || l.starts_with("zh-") || l.starts_with("zh_")
}

/// Tokenize `text` for the given language code.
///
/// Whitespace-delimited languages yield maximal non-whitespace runs; Chinese
/// yields one token per non-whitespace character.
pub fn tokenize(text: &str, lang: &str) -> TokenizedText {
    let mut tokens = Vec::new();
    if is_chinese(lang) {
        for (char_idx, (byte_idx, ch)) in text.char_indices().enumerate() {
            if !ch.is_whitespace() {
                tokens.push(Token {
                    text: ch.to_string(),
                    start: char_idx,
                    end: char_idx + 1,
                    byte_start: byte_idx,
                    byte_end: byte_idx + ch.len_utf8(),
                });
            }
        }
    } else {
        let mut current: Option<(usize, usize)> = None; // (char start, byte start)
        for (char_idx, (byte_idx, ch)) in text.char_indices().enumerate() {
            if ch.is_whitespace() {
                if let Some((cs, bs)) = current.take() {
                    tokens.push(Token {
                        text: text[bs..byte_idx].to_string(),
                        start: cs,
                        end: char_idx,
                        byte_start: bs,
                        byte_end: byte_idx,
                    });
                }
            } else if current.is_none() {
                current = Some((char_idx, byte_idx));
            }
        }
        if let Some((cs, bs)) = current {
            tokens.push(Token {
                text: text[bs..].to_string(),
                start: cs,
                end: text.chars().count(),
                byte_start: bs,
                byte_end: text.len(),
            });
        }
    }
    TokenizedText {
        text: text.to_string(),
        tokens,
    }
}

/// Build the window covering tokens `[first, first + count)`.
pub fn window_over_tokens(tt: &TokenizedText, first: usize, count: usize) -> WindowSpan {
    debug_assert!(count >= 1 && first + count <= tt.tokens.len());
    let start_tok = &tt.tokens[first];
    let end_tok = &tt.tokens[first + count - 1];
    WindowSpan {
        first_token: first,
        token_count: count,
        span: CharSpan::new(start_tok.start, end_tok.end),
        text: tt.text[start_tok.byte_start..end_tok.byte_end].to_string(),
    }
}

/// Enumerate sliding windows of `window_size` tokens advancing by `stride`.
pub fn enumerate_windows(
    tt: &TokenizedText,
    window_size: usize,
    stride: usize,
) -> Result<Vec<WindowSpan>> {
    if window_size < 1 {
        return Err(Error::config("window_size", "must be >= 1"));
    }
    if stride < 1 || stride > window_size {
        return Err(Error::config(
            "stride",
            format!("stride {stride} must satisfy 1 <= stride <= window_size {window_size}"),
        ));
    }
    let n = tt.tokens.len();
    let mut windows = Vec::new();
    let mut start = 0;
    while start < n {
        let count = window_size.min(n - start);
        windows.push(window_over_tokens(tt, start, count));
        start += stride;
    }
    Ok(windows)
}

/// Candidate pool: every window of every sample, tagged with its sample index.
pub fn segment_samples(
    samples: &SampleSet,
    lang: &str,
    window_size: usize,
    stride: usize,
) -> Result<Vec<(usize, WindowSpan)>> {
    let mut pool = Vec::new();
    for (sample_idx, sample) in samples.samples.iter().enumerate() {
        let tt = tokenize(sample, lang);
        for window in enumerate_windows(&tt, window_size, stride)? {
            pool.push((sample_idx, window));
        }
    }
    Ok(pool)
}
