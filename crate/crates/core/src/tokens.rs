//! Token counting for tool schemas and token-reduction accounting.
//!
//! Counting does not try to replicate any proprietary tokenizer. The
//! reduction rate is a ratio, so it is largely insensitive to the counting
//! rule as long as numerator and denominator use the same one; what matters
//! is that counting is deterministic for a fixed spec.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenError {
    #[error("failed to read vocabulary {path}: {reason}")]
    VocabUnreadable { path: String, reason: String },
    #[error("chars_per_token must be positive")]
    ZeroDivisor,
    #[error("baseline token count must be positive")]
    ZeroBaseline,
    #[error("selected tokens ({selected}) exceed baseline ({baseline})")]
    SelectionExceedsBaseline { selected: u64, baseline: u64 },
}

/// How schema text is turned into a token count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TokenizerSpec {
    /// `ceil(chars / chars_per_token)`; the classic rough estimate.
    ApproximateChars { chars_per_token: u32 },
    /// Alphanumeric runs are one token each and every other non-whitespace
    /// character counts as its own token. The default.
    #[default]
    WhitespacePunct,
    /// Greedy longest-match against a vocabulary file (one token string per
    /// line); characters not covered by the vocabulary count singly.
    ExternalVocab { vocab_path: PathBuf },
}

/// A tokenizer with any file-backed state loaded up front, so per-text
/// counting is infallible and cheap.
pub struct Tokenizer {
    rule: Rule,
}

enum Rule {
    ApproximateChars { chars_per_token: u32 },
    WhitespacePunct,
    Vocab { entries: BTreeSet<String>, max_len: usize },
}

impl Tokenizer {
    pub fn new(spec: &TokenizerSpec) -> Result<Self, TokenError> {
        let rule = match spec {
            TokenizerSpec::ApproximateChars { chars_per_token } => {
                if *chars_per_token == 0 {
                    return Err(TokenError::ZeroDivisor);
                }
                Rule::ApproximateChars {
                    chars_per_token: *chars_per_token,
                }
            }
            TokenizerSpec::WhitespacePunct => Rule::WhitespacePunct,
            TokenizerSpec::ExternalVocab { vocab_path } => {
                let entries = load_vocab(vocab_path)?;
                let max_len = entries.iter().map(|e| e.chars().count()).max().unwrap_or(0);
                Rule::Vocab { entries, max_len }
            }
        };
        Ok(Self { rule })
    }

    pub fn count(&self, text: &str) -> u64 {
        match &self.rule {
            Rule::ApproximateChars { chars_per_token } => {
                let chars = text.chars().count() as u64;
                chars.div_ceil(u64::from(*chars_per_token))
            }
            Rule::WhitespacePunct => whitespace_punct_count(text),
            Rule::Vocab { entries, max_len } => vocab_count(text, entries, *max_len),
        }
    }
}

fn load_vocab(path: &Path) -> Result<BTreeSet<String>, TokenError> {
    let text = std::fs::read_to_string(path).map_err(|e| TokenError::VocabUnreadable {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(text
        .lines()
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn whitespace_punct_count(text: &str) -> u64 {
    let mut count = 0u64;
    let mut in_word = false;
    for c in text.chars() {
        if c.is_alphanumeric() {
            if !in_word {
                count += 1;
                in_word = true;
            }
        } else {
            in_word = false;
            if !c.is_whitespace() {
                count += 1;
            }
        }
    }
    count
}

fn vocab_count(text: &str, entries: &BTreeSet<String>, max_len: usize) -> u64 {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0u64;
    let mut pos = 0;
    while pos < chars.len() {
        let limit = max_len.min(chars.len() - pos);
        let mut matched = 1;
        for len in (1..=limit).rev() {
            let candidate: String = chars[pos..pos + len].iter().collect();
            if entries.contains(&candidate) {
                matched = len;
                break;
            }
        }
        count += 1;
        pos += matched;
    }
    count
}

/// Count tokens of `text` under `spec`. Empty text counts zero.
pub fn count_tokens(spec: &TokenizerSpec, text: &str) -> Result<u64, TokenError> {
    Ok(Tokenizer::new(spec)?.count(text))
}

/// Token Reduction Rate: `1 - selected / baseline`, in [0, 1]. The two
/// counts must come from the same tokenizer and the selection must be a
/// subset of the baseline catalog.
pub fn token_reduction(baseline_tokens: u64, selected_tokens: u64) -> Result<f64, TokenError> {
    if baseline_tokens == 0 {
        return Err(TokenError::ZeroBaseline);
    }
    if selected_tokens > baseline_tokens {
        return Err(TokenError::SelectionExceedsBaseline {
            selected: selected_tokens,
            baseline: baseline_tokens,
        });
    }
    Ok(1.0 - selected_tokens as f64 / baseline_tokens as f64)
}
