//! Deterministic normalization and tokenization.
//!
//! Every set operation downstream — filtering, scoring, fusion, and the
//! overlap metrics — runs in the token space produced here, so the
//! pipeline is fixed and versioned: Unicode NFC, optional case folding,
//! punctuation stripping, length and stopword filters. Hyphens and
//! slashes split tokens ("sickle-cell" → `sickle`, `cell`) to maximize
//! overlap between spelling variants; numbers survive because variant
//! identifiers are discriminative; Greek letters are kept, never
//! transliterated.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::types::StopwordChoice;

/// The builtin English stopword list shipped with the crate.
pub const BUILTIN_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Version tag of [`BUILTIN_STOPWORDS`]; part of the policy fingerprint.
pub const BUILTIN_STOPWORDS_VERSION: &str = "en-1";

/// Resolved stopword set for a policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopwordSet {
    /// Keep everything.
    None,
    /// The versioned builtin English list.
    Builtin,
    /// A caller-supplied list, identified in fingerprints by content hash.
    Custom(BTreeSet<String>),
}

/// How text becomes tokens. Two policies with equal fingerprints
/// produce identical token streams for any input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenPolicy {
    pub lowercase: bool,
    /// When set, only alphanumeric characters survive; everything else
    /// (punctuation, hyphens, slashes) separates tokens. When unset,
    /// tokens are whitespace-delimited and keep their punctuation.
    pub strip_punctuation: bool,
    pub stopwords: StopwordSet,
    /// Minimum token length in characters; shorter tokens are dropped.
    pub min_token_length: usize,
}

impl TokenPolicy {
    /// The policy used for filtering, scoring, and fusion: lowercase,
    /// punctuation-stripped, builtin stopwords removed.
    pub fn scoring() -> Self {
        Self { lowercase: true, strip_punctuation: true, stopwords: StopwordSet::Builtin, min_token_length: 1 }
    }

    /// The policy behind ROUGE and BLEU: lowercase and
    /// punctuation-stripped, but NO stopword removal — the overlap
    /// metrics follow their standard definitions.
    pub fn metric() -> Self {
        Self { lowercase: true, strip_punctuation: true, stopwords: StopwordSet::None, min_token_length: 1 }
    }

    /// Scoring policy with the stopword source taken from configuration.
    /// Custom files are read here; the error carries the path.
    pub fn scoring_with(choice: &StopwordChoice) -> Result<Self, StopwordFileError> {
        let stopwords = match choice {
            StopwordChoice::None => StopwordSet::None,
            StopwordChoice::Builtin => StopwordSet::Builtin,
            StopwordChoice::Custom(path) => StopwordSet::Custom(load_stopword_file(path)?),
        };
        Ok(Self { stopwords, ..Self::scoring() })
    }

    /// Stable identifier of this policy. Content produced under
    /// different fingerprints must never be compared token-wise.
    pub fn fingerprint(&self) -> String {
        let stop_tag = match &self.stopwords {
            StopwordSet::None => "none".to_string(),
            StopwordSet::Builtin => format!("builtin:{BUILTIN_STOPWORDS_VERSION}"),
            StopwordSet::Custom(words) => {
                let mut hasher = Sha256::new();
                for w in words {
                    hasher.update(w.as_bytes());
                    hasher.update(b"\n");
                }
                format!("custom:{}", hex_encode(&hasher.finalize()))
            }
        };
        let descriptor = format!(
            "tokenize-v1|lowercase={}|strip_punctuation={}|min_len={}|stopwords={}",
            self.lowercase, self.strip_punctuation, self.min_token_length, stop_tag
        );
        let digest = Sha256::digest(descriptor.as_bytes());
        hex_encode(&digest)[..16].to_string()
    }

    fn is_stopword(&self, token: &str) -> bool {
        match &self.stopwords {
            StopwordSet::None => false,
            StopwordSet::Builtin => builtin_stopwords().contains(token),
            StopwordSet::Custom(words) => words.contains(token),
        }
    }
}

impl Default for TokenPolicy {
    fn default() -> Self {
        Self::scoring()
    }
}

#[derive(Debug, Error)]
#[error("failed to read stopword file {path}: {source}")]
pub struct StopwordFileError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

/// Lowercase hex of a byte string; used wherever digests become
/// identifiers (fingerprints, cache keys).
pub fn hex_encode(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn builtin_stopwords() -> &'static BTreeSet<String> {
    use std::sync::OnceLock;
    static SET: OnceLock<BTreeSet<String>> = OnceLock::new();
    SET.get_or_init(|| parse_stopword_list(BUILTIN_STOPWORDS))
}

/// Parses a stopword list: one token per line, `#` comments and blank
/// lines ignored. Entries are NFC-normalized and lowercased.
pub fn parse_stopword_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(|word| word.nfc().collect::<String>().to_lowercase())
        .collect()
}

/// Reads and parses a custom stopword file.
pub fn load_stopword_file(path: &Path) -> Result<BTreeSet<String>, StopwordFileError> {
    let text = fs::read_to_string(path)
        .map_err(|source| StopwordFileError { path: path.display().to_string(), source })?;
    Ok(parse_stopword_list(&text))
}

/// Splits text into normalized tokens under the policy. Deterministic;
/// empty input yields an empty list.
pub fn tokenize(text: &str, policy: &TokenPolicy) -> Vec<String> {
    let normalized: String = text.nfc().collect();
    let folded = if policy.lowercase { normalized.to_lowercase() } else { normalized };

    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in folded.chars() {
        let keep = if policy.strip_punctuation { ch.is_alphanumeric() } else { !ch.is_whitespace() };
        if keep {
            current.push(ch);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }

    tokens.retain(|t| t.chars().count() >= policy.min_token_length && !policy.is_stopword(t));
    tokens
}

/// The distinct-token set of [`tokenize`].
pub fn token_set(text: &str, policy: &TokenPolicy) -> BTreeSet<String> {
    tokenize(text, policy).into_iter().collect()
}

/// Splits text into sentences: runs of text ended by `.`, `!`, or `?`
/// (followed by whitespace or end of input), or by a newline. Returned
/// slices are trimmed verbatim substrings of the input, so extractive
/// filters can guarantee their segments appear in the source.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let bytes = text.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let at_terminator = matches!(b, b'.' | b'!' | b'?');
        let at_newline = b == b'\n';
        if at_terminator {
            // Consume the full terminator run (e.g. "?!" or "...").
            let mut end = i + 1;
            while end < bytes.len() && matches!(bytes[end], b'.' | b'!' | b'?') {
                end += 1;
            }
            let boundary = end >= bytes.len() || bytes[end].is_ascii_whitespace();
            if boundary {
                push_trimmed(&mut sentences, &text[start..end]);
                start = end;
            }
            i = end;
        } else if at_newline {
            push_trimmed(&mut sentences, &text[start..i]);
            start = i + 1;
            i += 1;
        } else {
            i += 1;
        }
    }
    if start < bytes.len() {
        push_trimmed(&mut sentences, &text[start..]);
    }
    sentences
}

fn push_trimmed<'a>(out: &mut Vec<&'a str>, piece: &'a str) {
    let trimmed = piece.trim();
    if !trimmed.is_empty() {
        out.push(trimmed);
    }
}
