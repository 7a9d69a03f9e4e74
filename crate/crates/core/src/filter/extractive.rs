//! Deterministic extractive filter: keep the sentences whose token
//! overlap with the query reaches a threshold, optionally with a
//! window of surrounding context. Verbatim by construction, so its
//! output token set is always a subset of the input's.

use thiserror::Error;

use crate::filter::{require_fetched, FilterError, FilterInterface};
use crate::tokenize::{split_sentences, token_set, TokenPolicy};
use crate::types::{FilteredContent, Query, RawContent};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractiveFilterConfig {
    /// Minimum distinct query tokens a sentence must share to be kept.
    pub keep_threshold: usize,
    /// Context sentences retained on each side of a kept sentence.
    pub window: usize,
}

impl Default for ExtractiveFilterConfig {
    fn default() -> Self {
        Self { keep_threshold: 1, window: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("keep_threshold must be at least 1")]
pub struct InvalidExtractiveConfig;

pub struct ExtractiveFilter {
    config: ExtractiveFilterConfig,
    policy: TokenPolicy,
}

impl ExtractiveFilter {
    pub fn new(config: ExtractiveFilterConfig, policy: TokenPolicy) -> Result<Self, InvalidExtractiveConfig> {
        if config.keep_threshold == 0 {
            return Err(InvalidExtractiveConfig);
        }
        Ok(Self { config, policy })
    }

    /// Threshold 1, no context window, under the given policy.
    pub fn with_defaults(policy: TokenPolicy) -> Self {
        Self { config: ExtractiveFilterConfig::default(), policy }
    }
}

impl FilterInterface for ExtractiveFilter {
    fn filter(&self, query: &Query, raw: &RawContent) -> Result<FilteredContent, FilterError> {
        require_fetched(raw)?;
        let query_tokens = token_set(&query.text, &self.policy);
        let sentences = split_sentences(&raw.text);

        let mut keep = vec![false; sentences.len()];
        if !query_tokens.is_empty() {
            for (i, sentence) in sentences.iter().enumerate() {
                let overlap = token_set(sentence, &self.policy)
                    .intersection(&query_tokens)
                    .count();
                if overlap >= self.config.keep_threshold {
                    let lo = i.saturating_sub(self.config.window);
                    let hi = (i + self.config.window).min(sentences.len() - 1);
                    for flag in &mut keep[lo..=hi] {
                        *flag = true;
                    }
                }
            }
        }

        let segments: Vec<String> = sentences
            .iter()
            .zip(&keep)
            .filter(|(_, &kept)| kept)
            .map(|(s, _)| s.to_string())
            .collect();
        Ok(FilteredContent::from_segments(raw.source.clone(), segments, &self.policy))
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;
    use crate::types::{FetchStatus, Section, SourceRef};

    fn raw(text: &str) -> RawContent {
        RawContent {
            source: SourceRef::seed("sim://doc"),
            text: text.to_string(),
            links: vec![],
            sections: vec![Section { id: "body".into(), text: text.to_string() }],
            fetched_at: 0,
            status: FetchStatus::Ok,
        }
    }

    fn query(text: &str) -> Query {
        Query::new("q", text).unwrap()
    }

    fn filter_with(config: ExtractiveFilterConfig) -> ExtractiveFilter {
        ExtractiveFilter::new(config, TokenPolicy::scoring()).unwrap()
    }

    #[test]
    fn disjoint_query_keeps_nothing() {
        let filter = ExtractiveFilter::with_defaults(TokenPolicy::scoring());
        let out = filter
            .filter(&query("quantum chromodynamics"), &raw("The HBB gene encodes beta-globin."))
            .unwrap();
        assert!(out.segments.is_empty());
        assert_eq!(out.word_count, 0);
    }

    #[test]
    fn fully_relevant_document_keeps_every_token() {
        let policy = TokenPolicy::scoring();
        let text = "The HBB gene causes anemia. HBB mutations alter hemoglobin. Anemia involves hemoglobin.";
        let filter = ExtractiveFilter::with_defaults(policy.clone());
        let out = filter.filter(&query("HBB hemoglobin anemia gene"), &raw(text)).unwrap();
        assert_eq!(out.tokens, token_set(text, &policy));
        assert_eq!(out.segments.len(), 3);
    }

    #[test]
    fn segments_are_verbatim_substrings_in_source_order() {
        let text = "Irrelevant preamble without matches. The HBB gene sits on chromosome 11. \
                    Unrelated middle sentence. HBB variants cause sickling.";
        let filter = ExtractiveFilter::with_defaults(TokenPolicy::scoring());
        let out = filter.filter(&query("HBB"), &raw(text)).unwrap();
        assert_eq!(out.segments.len(), 2);
        let mut cursor = 0;
        for seg in &out.segments {
            let pos = text[cursor..].find(seg.as_str()).expect("segment must appear after previous");
            cursor += pos + seg.len();
        }
    }

    #[test]
    fn higher_threshold_demands_more_overlap() {
        let text = "HBB alone here. HBB and hemoglobin together. Nothing relevant.";
        let loose = filter_with(ExtractiveFilterConfig { keep_threshold: 1, window: 0 });
        let strict = filter_with(ExtractiveFilterConfig { keep_threshold: 2, window: 0 });
        let q = query("HBB hemoglobin");
        assert_eq!(loose.filter(&q, &raw(text)).unwrap().segments.len(), 2);
        let strict_out = strict.filter(&q, &raw(text)).unwrap();
        assert_eq!(strict_out.segments, vec!["HBB and hemoglobin together.".to_string()]);
    }

    #[test]
    fn window_retains_context_sentences() {
        let text = "Context before. HBB is the match. Context after. Far away sentence.";
        let windowed = filter_with(ExtractiveFilterConfig { keep_threshold: 1, window: 1 });
        let out = windowed.filter(&query("HBB"), &raw(text)).unwrap();
        assert_eq!(
            out.segments,
            vec!["Context before.".to_string(), "HBB is the match.".to_string(), "Context after.".to_string()]
        );
    }

    #[test]
    fn all_stopword_query_matches_nothing() {
        let filter = ExtractiveFilter::with_defaults(TokenPolicy::scoring());
        let out = filter.filter(&query("the of and"), &raw("The gene of interest.")).unwrap();
        assert!(out.segments.is_empty());
    }

    #[test]
    fn zero_keep_threshold_is_rejected() {
        assert!(ExtractiveFilter::new(
            ExtractiveFilterConfig { keep_threshold: 0, window: 0 },
            TokenPolicy::scoring()
        )
        .is_err());
    }

    #[test]
    fn unfetched_sources_are_refused() {
        let filter = ExtractiveFilter::with_defaults(TokenPolicy::scoring());
        let mut blocked = raw("text");
        blocked.status = FetchStatus::Blocked;
        assert!(matches!(
            filter.filter(&query("text"), &blocked),
            Err(FilterError::SourceNotFetched { .. })
        ));
    }

    proptest! {
        /// Output tokens ⊆ input tokens, and lowering the threshold
        /// never shrinks the retained token set.
        #[test]
        fn subset_and_threshold_monotonicity(
            words in proptest::collection::vec("[a-d]{1,2}", 1..40),
            query_words in proptest::collection::vec("[a-d]{1,2}", 1..4),
            threshold in 1usize..4,
        ) {
            // Assemble text with sentence breaks every few words.
            let mut text = String::new();
            for (i, w) in words.iter().enumerate() {
                text.push_str(w);
                text.push_str(if i % 5 == 4 { ". " } else { " " });
            }
            let policy = TokenPolicy::metric();
            let q = query(&query_words.join(" "));
            let input = raw(&text);

            let strict = ExtractiveFilter::new(
                ExtractiveFilterConfig { keep_threshold: threshold, window: 0 }, policy.clone()
            ).unwrap().filter(&q, &input).unwrap();
            let loose = ExtractiveFilter::new(
                ExtractiveFilterConfig { keep_threshold: 1, window: 0 }, policy.clone()
            ).unwrap().filter(&q, &input).unwrap();

            let input_tokens: BTreeSet<String> = token_set(&text, &policy);
            prop_assert!(strict.tokens.is_subset(&input_tokens));
            prop_assert!(loose.tokens.is_subset(&input_tokens));
            prop_assert!(strict.tokens.is_subset(&loose.tokens));
            prop_assert_eq!(strict.word_count, strict.tokens.len());
        }

        /// Equal inputs, equal outputs — byte for byte.
        #[test]
        fn deterministic(
            words in proptest::collection::vec("[a-e]{1,3}", 1..30),
        ) {
            let text = words.join(" ");
            let q = query("aa bb");
            let filter = ExtractiveFilter::with_defaults(TokenPolicy::metric());
            let a = filter.filter(&q, &raw(&text)).unwrap();
            let b = filter.filter(&q, &raw(&text)).unwrap();
            prop_assert_eq!(
                serde_json::to_vec(&a).unwrap(),
                serde_json::to_vec(&b).unwrap()
            );
        }
    }
}
