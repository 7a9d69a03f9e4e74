//! Query-specific content refinement behind one interface, with two
//! implementations: a deterministic extractive filter (offline,
//! testable, verbatim by construction) and a chat-completion LLM
//! filter (production, replay-cached, compliance-measured).

mod extractive;
mod llm;

pub use extractive::{ExtractiveFilter, ExtractiveFilterConfig};
pub use llm::{LlmFilter, LlmFilterConfig, DEFAULT_PROMPT_TEMPLATE};

use thiserror::Error;

use crate::tokenize::{token_set, TokenPolicy};
use crate::types::{FetchStatus, FilteredContent, Query, RawContent, SourceRef};

/// Reduces raw content to the query-relevant subset. Implementations
/// must be shareable across the engine's per-layer worker threads.
pub trait FilterInterface: Send + Sync {
    fn filter(&self, query: &Query, raw: &RawContent) -> Result<FilteredContent, FilterError>;
}

impl<F: FilterInterface + ?Sized> FilterInterface for &F {
    fn filter(&self, query: &Query, raw: &RawContent) -> Result<FilteredContent, FilterError> {
        (**self).filter(query, raw)
    }
}

#[derive(Debug, Error)]
pub enum FilterError {
    /// The contract requires fetched content; scoring a failed source
    /// is the engine's job, not the filter's.
    #[error("source {uri} was not fetched (status {status})")]
    SourceNotFetched { uri: String, status: &'static str },
    #[error("llm filter failed for {uri}: {message}")]
    Llm { uri: String, message: String },
    #[error("replay cache error for {uri}: {message}")]
    Replay { uri: String, message: String },
}

pub(crate) fn require_fetched(raw: &RawContent) -> Result<(), FilterError> {
    match raw.status {
        FetchStatus::Ok => Ok(()),
        FetchStatus::Blocked => Err(not_fetched(raw, "blocked")),
        FetchStatus::Paywalled => Err(not_fetched(raw, "paywalled")),
        FetchStatus::NetworkError => Err(not_fetched(raw, "network_error")),
    }
}

fn not_fetched(raw: &RawContent, status: &'static str) -> FilterError {
    FilterError::SourceNotFetched { uri: raw.source.uri.clone(), status }
}

/// Fraction of the raw content removed by filtering, in distinct-token
/// terms: `1 − filtered/raw`. `None` when the raw text has no tokens.
/// Clamped at 0 for filters that may emit tokens absent from the source.
pub fn reduction_ratio(raw: &RawContent, filtered: &FilteredContent, policy: &TokenPolicy) -> Option<f64> {
    let raw_count = token_set(&raw.text, policy).len();
    if raw_count == 0 {
        return None;
    }
    Some((1.0 - filtered.word_count as f64 / raw_count as f64).max(0.0))
}

/// Links that survive filtering: a link counts as "embedded in the
/// filtered content" when its anchor text still appears in a retained
/// segment. Links without anchor text cannot be located and are
/// dropped. Order follows the raw document.
pub fn filtered_links(raw: &RawContent, filtered: &FilteredContent) -> Vec<SourceRef> {
    let segments: Vec<String> = filtered.segments.iter().map(|s| collapse_ws(s)).collect();
    raw.links
        .iter()
        .filter(|link| {
            link.anchor_text
                .as_deref()
                .map(collapse_ws)
                .filter(|anchor| !anchor.is_empty())
                .is_some_and(|anchor| segments.iter().any(|seg| seg.contains(&anchor)))
        })
        .cloned()
        .collect()
}

/// Fraction of filtered segments that appear verbatim (modulo
/// whitespace) in the raw text. 1.0 for an honest extractive filter;
/// measured and reported, not enforced, for model-based filters.
/// `None` when there are no segments to judge.
pub fn verbatim_fraction(raw: &RawContent, filtered: &FilteredContent) -> Option<f64> {
    if filtered.segments.is_empty() {
        return None;
    }
    let haystack = collapse_ws(&raw.text);
    let verbatim = filtered
        .segments
        .iter()
        .filter(|seg| {
            let needle = collapse_ws(seg);
            !needle.is_empty() && haystack.contains(&needle)
        })
        .count();
    Some(verbatim as f64 / filtered.segments.len() as f64)
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Section;

    fn raw_with(text: &str, links: Vec<SourceRef>) -> RawContent {
        RawContent {
            source: SourceRef::seed("sim://doc"),
            text: text.to_string(),
            links,
            sections: vec![Section { id: "body".into(), text: text.to_string() }],
            fetched_at: 0,
            status: FetchStatus::Ok,
        }
    }

    fn filtered_with(segments: &[&str]) -> FilteredContent {
        FilteredContent::from_segments(
            SourceRef::seed("sim://doc"),
            segments.iter().map(|s| s.to_string()).collect(),
            &TokenPolicy::scoring(),
        )
    }

    #[test]
    fn reduction_ratio_arithmetic() {
        let policy = TokenPolicy::metric();
        let raw_tokens: Vec<String> = (0..100).map(|i| format!("tok{i}")).collect();
        let raw = raw_with(&raw_tokens.join(" "), vec![]);
        let kept = raw_tokens[..20].join(" ");
        let filtered = FilteredContent::from_segments(raw.source.clone(), vec![kept], &policy);
        let ratio = reduction_ratio(&raw, &filtered, &policy).unwrap();
        assert!((ratio - 0.80).abs() < 1e-12);
    }

    #[test]
    fn identity_filtering_reduces_nothing() {
        let policy = TokenPolicy::metric();
        let raw = raw_with("alpha beta gamma", vec![]);
        let filtered =
            FilteredContent::from_segments(raw.source.clone(), vec![raw.text.clone()], &policy);
        assert_eq!(reduction_ratio(&raw, &filtered, &policy), Some(0.0));
    }

    #[test]
    fn reduction_at_reported_experiment_scale() {
        // 8,249 distinct words cut to 355 is a 95.70% reduction.
        let ratio: f64 = 1.0 - 355.0 / 8249.0;
        assert!((ratio - 0.9570).abs() < 5e-5, "{ratio}");
    }

    #[test]
    fn empty_raw_text_has_undefined_reduction() {
        let policy = TokenPolicy::metric();
        let raw = raw_with("", vec![]);
        let filtered = FilteredContent::empty(raw.source.clone(), &policy);
        assert_eq!(reduction_ratio(&raw, &filtered, &policy), None);
    }

    #[test]
    fn links_survive_only_inside_retained_segments() {
        let seed = SourceRef::seed("sim://doc");
        let links = vec![
            SourceRef::child_of(&seed, "sim://kept", Some("globin gene details".into())),
            SourceRef::child_of(&seed, "sim://dropped", Some("unrelated footer".into())),
            SourceRef::child_of(&seed, "sim://anonymous", None),
        ];
        let raw = raw_with("See globin gene details here. Also an unrelated footer.", links);
        let filtered = filtered_with(&["See globin gene details here."]);
        let survivors = filtered_links(&raw, &filtered);
        assert_eq!(survivors.len(), 1);
        assert_eq!(survivors[0].uri, "sim://kept");
    }

    #[test]
    fn anchor_matching_tolerates_whitespace_differences() {
        let seed = SourceRef::seed("sim://doc");
        let links = vec![SourceRef::child_of(&seed, "sim://a", Some("globin  gene".into()))];
        let raw = raw_with("About the globin gene family.", links);
        let filtered = filtered_with(&["About the globin\tgene family."]);
        assert_eq!(filtered_links(&raw, &filtered).len(), 1);
    }

    #[test]
    fn verbatim_fraction_measures_compliance() {
        let raw = raw_with("The HBB gene encodes beta-globin. Mutations cause disease.", vec![]);
        let honest = filtered_with(&["The HBB gene encodes beta-globin."]);
        assert_eq!(verbatim_fraction(&raw, &honest), Some(1.0));

        let half = filtered_with(&["The HBB gene encodes beta-globin.", "An invented summary sentence."]);
        assert_eq!(verbatim_fraction(&raw, &half), Some(0.5));

        let empty = filtered_with(&[]);
        assert_eq!(verbatim_fraction(&raw, &empty), None);
    }
}
