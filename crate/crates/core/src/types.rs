//! Shared domain types: queries, source references, raw and filtered
//! content, the knowledge container, per-source scores, engine
//! configuration, and the run trace emitted by every exploration.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A user's information need. The text drives both filtering and scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    /// Stable identifier, echoed into traces and output manifests.
    pub id: String,
    /// Free-form query text. Never empty.
    pub text: String,
}

impl Query {
    /// Builds a query, rejecting empty or whitespace-only text.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, InvalidQuery> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(InvalidQuery);
        }
        Ok(Self { id: id.into(), text })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query text must not be empty")]
pub struct InvalidQuery;

/// One node of the exploration tree.
///
/// Seeds sit at layer 0 with no parent; every discovered link sits one
/// layer below the source it was found in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    /// Locator understood by the content provider (`https://`, `file://`,
    /// or a scheme private to a corpus, e.g. `sim://`).
    pub uri: String,
    /// URI of the source this one was discovered in. `None` for seeds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
    /// Depth in the tree; seeds are 0.
    pub layer: u32,
    /// Anchor text of the link that led here, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_text: Option<String>,
}

impl SourceRef {
    /// A layer-0 source with no parent.
    pub fn seed(uri: impl Into<String>) -> Self {
        Self { uri: uri.into(), parent: None, layer: 0, anchor_text: None }
    }

    /// A source discovered inside `parent`, one layer deeper.
    pub fn child_of(parent: &SourceRef, uri: impl Into<String>, anchor_text: Option<String>) -> Self {
        Self {
            uri: uri.into(),
            parent: Some(parent.uri.clone()),
            layer: parent.layer + 1,
            anchor_text,
        }
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (layer {})", self.uri, self.layer)
    }
}

/// Outcome of a fetch attempt, recorded per source in the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FetchStatus {
    /// Content retrieved and extracted.
    Ok,
    /// The host refused access (robots.txt, 401/403/429).
    Blocked,
    /// The page loaded but its content sits behind a paywall.
    Paywalled,
    /// Transport-level failure: DNS, timeout, TLS, 5xx, missing file.
    NetworkError,
}

impl FetchStatus {
    /// True only for [`FetchStatus::Ok`]; every other status means the
    /// source contributes nothing downstream.
    pub fn is_ok(self) -> bool {
        matches!(self, FetchStatus::Ok)
    }
}

/// A heading-delimited portion of an extracted document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    /// Section identifier: the heading text, or a positional fallback.
    pub id: String,
    /// Plain text of the section, whitespace-collapsed.
    pub text: String,
}

/// Content as it came out of the fetcher, before any filtering.
///
/// `text` is always the section texts joined with blank lines, so the
/// two views never disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawContent {
    pub source: SourceRef,
    /// Extracted plain text of the whole document.
    pub text: String,
    /// Outgoing links, already resolved to absolute URIs and stamped as
    /// children of `source`.
    pub links: Vec<SourceRef>,
    /// Heading-delimited sections whose concatenation equals `text`.
    pub sections: Vec<Section>,
    /// Unix timestamp of the fetch, seconds.
    pub fetched_at: u64,
    pub status: FetchStatus,
}

impl RawContent {
    /// Content for a source that could not be fetched: empty text, no
    /// links, no sections.
    pub fn unavailable(source: SourceRef, status: FetchStatus, fetched_at: u64) -> Self {
        Self { source, text: String::new(), links: Vec::new(), sections: Vec::new(), fetched_at, status }
    }
}

/// Query-relevant excerpts of one source, in the token space of a
/// single tokenization policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilteredContent {
    pub source: SourceRef,
    /// Retained text segments, in document order.
    pub segments: Vec<String>,
    /// Distinct normalized tokens across all segments.
    pub tokens: BTreeSet<String>,
    /// Filtered size in the set semantics used everywhere: the number
    /// of distinct tokens. Always equals `tokens.len()`.
    pub word_count: usize,
    /// Fingerprint of the tokenization policy that produced `tokens`.
    /// Scoring refuses to compare content across different fingerprints.
    pub policy_fingerprint: String,
}

impl FilteredContent {
    /// Builds filtered content from retained segments; tokens and the
    /// word count derive from the policy, keeping the invariants true
    /// by construction.
    pub fn from_segments(
        source: SourceRef,
        segments: Vec<String>,
        policy: &crate::tokenize::TokenPolicy,
    ) -> Self {
        let mut tokens = BTreeSet::new();
        for segment in &segments {
            tokens.extend(crate::tokenize::tokenize(segment, policy));
        }
        let word_count = tokens.len();
        Self { source, segments, tokens, word_count, policy_fingerprint: policy.fingerprint() }
    }

    /// Filtered content of a source that yielded nothing.
    pub fn empty(source: SourceRef, policy: &crate::tokenize::TokenPolicy) -> Self {
        Self::from_segments(source, Vec::new(), policy)
    }
}

/// One fused excerpt inside the knowledge container, with provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContainerSegment {
    pub text: String,
    pub source_uri: String,
    pub layer: u32,
}

/// Accumulated knowledge: the union of all fused content.
///
/// Invariants: `size == tokens.len()`, and `tokens` is exactly the
/// union of the tokenized segments under the policy identified by
/// `policy_fingerprint`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeContainer {
    /// Distinct normalized tokens of everything merged so far.
    pub tokens: BTreeSet<String>,
    /// Fused excerpts with provenance, in merge order.
    pub segments: Vec<ContainerSegment>,
    /// Container size in distinct tokens; equals `tokens.len()`.
    pub size: usize,
    pub policy_fingerprint: String,
}

impl KnowledgeContainer {
    /// An empty container bound to one tokenization policy.
    pub fn empty(policy_fingerprint: impl Into<String>) -> Self {
        Self {
            tokens: BTreeSet::new(),
            segments: Vec::new(),
            size: 0,
            policy_fingerprint: policy_fingerprint.into(),
        }
    }

    /// Checks the internal size invariant. Fusion implementations are
    /// required to preserve it; tests lean on this.
    pub fn is_consistent(&self) -> bool {
        self.size == self.tokens.len()
    }
}

/// The scoring quantities for one source against a frozen container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceScore {
    /// Distinct filtered tokens not already in the container.
    pub unique_contribution: usize,
    /// Distinct filtered tokens already present in the container.
    pub overlap: usize,
    /// Fraction of the filtered tokens that are new. 0 when the source
    /// filtered down to nothing.
    pub density: f64,
    /// New tokens relative to the container size. Undefined (`None`)
    /// against an empty container.
    pub increase: Option<f64>,
    /// Log-normalized ranking score; the quantity thresholds and
    /// selection operate on.
    pub combined: f64,
}

/// Which filter implementation drives content reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    /// Deterministic query-overlap sentence selection. No network.
    Extractive,
    /// Chat-completion model filtering with a replay cache.
    Llm,
}

impl fmt::Display for FilterMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterMode::Extractive => f.write_str("extractive"),
            FilterMode::Llm => f.write_str("llm"),
        }
    }
}

/// Stopword handling for the tokenization policy.
///
/// Serializes as a plain string: `"none"`, `"builtin"`, or a file path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopwordChoice {
    /// Keep every token.
    None,
    /// The English list shipped with this crate.
    Builtin,
    /// One stopword per line; `#` comments and blank lines ignored.
    Custom(PathBuf),
}

impl StopwordChoice {
    pub fn parse(s: &str) -> Self {
        match s {
            "none" => StopwordChoice::None,
            "builtin" => StopwordChoice::Builtin,
            other => StopwordChoice::Custom(PathBuf::from(other)),
        }
    }
}

impl fmt::Display for StopwordChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopwordChoice::None => f.write_str("none"),
            StopwordChoice::Builtin => f.write_str("builtin"),
            StopwordChoice::Custom(path) => f.write_str(&path.to_string_lossy()),
        }
    }
}

impl Serialize for StopwordChoice {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for StopwordChoice {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(StopwordChoice::parse(&s))
    }
}

/// Everything that shapes a run. Serializable so a config file, CLI
/// flags, and the trace all speak the same schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Termination threshold on the best combined score of a layer.
    pub threshold: f64,
    /// Sources kept per layer after scoring.
    pub top_k: usize,
    /// Hard cap on exploration depth.
    pub max_layers: usize,
    pub filter_mode: FilterMode,
    pub stopword_policy: StopwordChoice,
    /// Seed for every randomized component; same seed, same run.
    pub random_seed: u64,
    /// Minimum pause between requests to the same host, milliseconds.
    pub politeness_delay_ms: u64,
    /// Directory for the on-disk fetch and filter caches. `None`
    /// disables caching.
    pub cache_dir: Option<PathBuf>,
    /// Upper bound on concurrent fetch+filter work within a layer.
    pub max_in_flight: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            threshold: 20.0,
            top_k: 2,
            max_layers: 8,
            filter_mode: FilterMode::Extractive,
            stopword_policy: StopwordChoice::Builtin,
            random_seed: 0,
            politeness_delay_ms: 500,
            cache_dir: None,
            max_in_flight: 4,
        }
    }
}

impl EngineConfig {
    /// Rejects configurations the engine cannot honor. An infinite
    /// threshold is allowed: it means "stop after scoring the seeds".
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(ConfigError::Threshold(self.threshold));
        }
        if self.top_k == 0 {
            return Err(ConfigError::TopK);
        }
        if self.max_layers == 0 {
            return Err(ConfigError::MaxLayers);
        }
        if self.max_in_flight == 0 {
            return Err(ConfigError::MaxInFlight);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("threshold must be non-negative and not NaN, got {0}")]
    Threshold(f64),
    #[error("top_k must be at least 1")]
    TopK,
    #[error("max_layers must be at least 1")]
    MaxLayers,
    #[error("max_in_flight must be at least 1")]
    MaxInFlight,
}

/// Why a run stopped. Exactly one of these is set, on the final layer
/// record of every trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The best combined score of the layer fell below the threshold;
    /// the layer was scored but not merged.
    Threshold,
    /// Nothing left to explore: no fetchable sources in the layer, or
    /// the previous layer's selection surfaced no new links.
    Exhausted,
    /// The depth cap was reached with links still on the table.
    MaxLayers,
}

impl fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminationReason::Threshold => f.write_str("threshold"),
            TerminationReason::Exhausted => f.write_str("exhausted"),
            TerminationReason::MaxLayers => f.write_str("max_layers"),
        }
    }
}

/// Everything the engine learned about one source, in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceOutcome {
    pub source: SourceRef,
    pub status: FetchStatus,
    /// Distinct tokens in the raw extracted text, before filtering.
    pub raw_token_count: usize,
    /// Distinct tokens after filtering; 0 for failed sources.
    pub filtered_word_count: usize,
    pub score: SourceScore,
    /// For model-based filters: the fraction of returned segments that
    /// are verbatim substrings of the raw text. Absent for filters
    /// that are verbatim by construction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbatim_fraction: Option<f64>,
    /// Human-readable cause when the source failed to contribute.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One explored layer in the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: u32,
    /// Every source considered in this layer, with its outcome.
    pub sources: Vec<SourceOutcome>,
    /// URIs that survived selection, best first. Empty on terminal
    /// layers that merged nothing.
    pub selected: Vec<String>,
    pub container_size_before: usize,
    pub container_size_after: usize,
    /// Set on the final record only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<TerminationReason>,
}

/// Full machine-readable account of a run: per-layer, per-source
/// outcomes plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub query: Query,
    pub config: EngineConfig,
    pub layers: Vec<LayerRecord>,
}

impl RunTrace {
    /// The reason the run stopped.
    pub fn termination(&self) -> Option<TerminationReason> {
        self.layers.last().and_then(|l| l.termination)
    }

    /// Structural checks every trace must satisfy. Returns a list of
    /// violation descriptions; empty means the trace is well-formed.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.layers.is_empty() {
            out.push("trace has no layers".to_string());
            return out;
        }
        for (i, rec) in self.layers.iter().enumerate() {
            if rec.layer as usize != i {
                out.push(format!("layer records not contiguous: index {i} holds layer {}", rec.layer));
            }
            if rec.container_size_after < rec.container_size_before {
                out.push(format!("layer {}: container shrank", rec.layer));
            }
            let is_last = i + 1 == self.layers.len();
            match (is_last, rec.termination) {
                (false, Some(t)) => out.push(format!("layer {}: termination {t} on a non-final layer", rec.layer)),
                (true, None) => out.push(format!("layer {}: final layer carries no termination reason", rec.layer)),
                _ => {}
            }
            for outcome in &rec.sources {
                if outcome.source.layer != rec.layer {
                    out.push(format!(
                        "layer {}: source {} stamped with layer {}",
                        rec.layer, outcome.source.uri, outcome.source.layer
                    ));
                }
                if rec.layer == 0 {
                    if outcome.source.parent.is_some() {
                        out.push(format!("seed {} has a parent", outcome.source.uri));
                    }
                } else if outcome.source.parent.is_none() {
                    out.push(format!("layer {}: source {} has no parent", rec.layer, outcome.source.uri));
                }
            }
        }
        for pair in self.layers.windows(2) {
            if pair[1].container_size_before != pair[0].container_size_after {
                out.push(format!(
                    "container size discontinuity between layers {} and {}",
                    pair[0].layer, pair[1].layer
                ));
            }
        }
        out
    }
}
