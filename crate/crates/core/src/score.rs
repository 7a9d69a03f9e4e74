//! Marginal-contribution scoring of filtered content against the
//! knowledge container.
//!
//! All quantities are set arithmetic over distinct normalized tokens:
//! `overlap` counts filtered tokens already known, `unique_contribution`
//! counts the new ones, `density` and `increase` normalize that novelty
//! by source size and container size, and `combined_score` — the
//! ranking key — divides the unique contribution by
//! `ln(1 + filtered_size + container_size)` so large sources and large
//! containers face diminishing returns.

use thiserror::Error;

use crate::types::{FilteredContent, KnowledgeContainer, SourceScore};

/// Comparing token sets built under different tokenization policies is
/// a contract violation, caught by fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("token policy mismatch: filtered content built with {filtered}, container with {container}")]
pub struct PolicyMismatch {
    pub filtered: String,
    pub container: String,
}

fn check_policies(filtered: &FilteredContent, container: &KnowledgeContainer) -> Result<(), PolicyMismatch> {
    if filtered.policy_fingerprint != container.policy_fingerprint {
        return Err(PolicyMismatch {
            filtered: filtered.policy_fingerprint.clone(),
            container: container.policy_fingerprint.clone(),
        });
    }
    Ok(())
}

/// Number of filtered tokens already present in the container.
pub fn overlap(filtered: &FilteredContent, container: &KnowledgeContainer) -> Result<usize, PolicyMismatch> {
    check_policies(filtered, container)?;
    Ok(filtered.tokens.intersection(&container.tokens).count())
}

/// Number of filtered tokens NOT in the container: the source's new
/// knowledge, and the numerator of every derived quantity.
pub fn unique_contribution(
    filtered: &FilteredContent,
    container: &KnowledgeContainer,
) -> Result<usize, PolicyMismatch> {
    Ok(filtered.word_count - overlap(filtered, container)?)
}

/// Fraction of the filtered tokens that are new; 0 for an empty
/// filtered set so that ranking stays total.
pub fn knowledge_density(
    filtered: &FilteredContent,
    container: &KnowledgeContainer,
) -> Result<f64, PolicyMismatch> {
    let unique = unique_contribution(filtered, container)?;
    if filtered.word_count == 0 {
        return Ok(0.0);
    }
    Ok(unique as f64 / filtered.word_count as f64)
}

/// New tokens relative to the container size; `None` (undefined)
/// against an empty container.
pub fn knowledge_increase(
    filtered: &FilteredContent,
    container: &KnowledgeContainer,
) -> Result<Option<f64>, PolicyMismatch> {
    let unique = unique_contribution(filtered, container)?;
    if container.size == 0 {
        return Ok(None);
    }
    Ok(Some(unique as f64 / container.size as f64))
}

/// The ranking score: `unique / ln(1 + filtered_size + container_size)`,
/// with a zero numerator short-circuiting to 0 (which also covers the
/// `ln(1) = 0` singularity when both sizes are 0).
pub fn combined_score(
    filtered: &FilteredContent,
    container: &KnowledgeContainer,
) -> Result<f64, PolicyMismatch> {
    let unique = unique_contribution(filtered, container)?;
    if unique == 0 {
        return Ok(0.0);
    }
    Ok(unique as f64 / (1.0 + filtered.word_count as f64 + container.size as f64).ln())
}

/// All scoring quantities in one pass over the intersection.
pub fn score_source(
    filtered: &FilteredContent,
    container: &KnowledgeContainer,
) -> Result<SourceScore, PolicyMismatch> {
    let overlap = overlap(filtered, container)?;
    let unique = filtered.word_count - overlap;
    let density = if filtered.word_count == 0 { 0.0 } else { unique as f64 / filtered.word_count as f64 };
    let increase = if container.size == 0 { None } else { Some(unique as f64 / container.size as f64) };
    let combined = if unique == 0 {
        0.0
    } else {
        unique as f64 / (1.0 + filtered.word_count as f64 + container.size as f64).ln()
    };
    Ok(SourceScore { unique_contribution: unique, overlap, density, increase, combined })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    use super::*;
    use crate::types::SourceRef;

    const FP: &str = "test-policy";

    fn filtered(tokens: &[&str]) -> FilteredContent {
        let tokens: BTreeSet<String> = tokens.iter().map(|t| t.to_string()).collect();
        FilteredContent {
            source: SourceRef::seed("sim://f"),
            segments: vec![],
            word_count: tokens.len(),
            tokens,
            policy_fingerprint: FP.to_string(),
        }
    }

    fn container(tokens: &[&str]) -> KnowledgeContainer {
        let tokens: BTreeSet<String> = tokens.iter().map(|t| t.to_string()).collect();
        let size = tokens.len();
        KnowledgeContainer { tokens, segments: vec![], size, policy_fingerprint: FP.to_string() }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap(&filtered(&["a", "b", "c"]), &container(&[])).unwrap(), 0);
        assert_eq!(overlap(&filtered(&["a", "b"]), &container(&["a", "b"])).unwrap(), 2);
        assert_eq!(overlap(&filtered(&["a", "b", "c", "d"]), &container(&["b", "d", "e"])).unwrap(), 2);
    }

    #[test]
    fn unique_contribution_examples() {
        assert_eq!(unique_contribution(&filtered(&["a", "b", "c"]), &container(&[])).unwrap(), 3);
        assert_eq!(unique_contribution(&filtered(&["a", "b"]), &container(&["a", "b", "z"])).unwrap(), 0);
        assert_eq!(
            unique_contribution(&filtered(&["a", "b", "c", "d"]), &container(&["b", "d", "e"])).unwrap(),
            2
        );
    }

    #[test]
    fn density_examples() {
        assert_eq!(knowledge_density(&filtered(&["a", "b", "c"]), &container(&[])).unwrap(), 1.0);
        assert_eq!(knowledge_density(&filtered(&["a", "b"]), &container(&["a", "b"])).unwrap(), 0.0);
        assert_eq!(
            knowledge_density(&filtered(&["a", "b", "c", "d"]), &container(&["b", "d", "e"])).unwrap(),
            0.5
        );
        assert_eq!(knowledge_density(&filtered(&[]), &container(&["a"])).unwrap(), 0.0);
    }

    #[test]
    fn increase_examples() {
        assert_eq!(
            knowledge_increase(&filtered(&["a", "b"]), &container(&["x", "y", "z", "w"])).unwrap(),
            Some(0.5)
        );
        assert_eq!(knowledge_increase(&filtered(&["a"]), &container(&["a"])).unwrap(), Some(0.0));
        assert_eq!(knowledge_increase(&filtered(&["a", "b"]), &container(&[])).unwrap(), None);
    }

    #[test]
    fn combined_score_examples() {
        let three_new = combined_score(&filtered(&["a", "b", "c"]), &container(&[])).unwrap();
        assert_relative_eq!(three_new, 3.0 / 4.0_f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(three_new, 2.164_042_561_333_445, max_relative = 1e-12);

        assert_eq!(combined_score(&filtered(&["a", "b"]), &container(&["a", "b"])).unwrap(), 0.0);
    }

    #[test]
    fn combined_score_at_experiment_scale() {
        // 30 unique among 50 filtered tokens against a 200-token
        // container: 30 / ln(251).
        let mut f_tokens = Vec::new();
        for i in 0..30 {
            f_tokens.push(format!("new{i}"));
        }
        for i in 0..20 {
            f_tokens.push(format!("old{i}"));
        }
        let mut k_tokens: Vec<String> = (0..20).map(|i| format!("old{i}")).collect();
        k_tokens.extend((0..180).map(|i| format!("known{i}")));

        let f_refs: Vec<&str> = f_tokens.iter().map(|s| s.as_str()).collect();
        let k_refs: Vec<&str> = k_tokens.iter().map(|s| s.as_str()).collect();
        let score = score_source(&filtered(&f_refs), &container(&k_refs)).unwrap();

        assert_eq!(score.unique_contribution, 30);
        assert_eq!(score.overlap, 20);
        assert_relative_eq!(score.combined, 30.0 / 251.0_f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(score.combined, 5.429_419_149_973_596, max_relative = 1e-12);
    }

    #[test]
    fn zero_zero_singularity_scores_zero() {
        assert_eq!(combined_score(&filtered(&[]), &container(&[])).unwrap(), 0.0);
    }

    #[test]
    fn policy_mismatch_is_an_error() {
        let f = filtered(&["a"]);
        let mut k = container(&["b"]);
        k.policy_fingerprint = "other-policy".to_string();
        let err = overlap(&f, &k).unwrap_err();
        assert_eq!(err.filtered, FP);
        assert_eq!(err.container, "other-policy");
        assert!(score_source(&f, &k).is_err());
    }

    #[test]
    fn disjoint_container_growth_decreases_combined_score() {
        let f = filtered(&["a", "b", "c"]);
        let small = container(&["x"]);
        let large = container(&["x", "y", "z", "w", "v"]);
        let s_small = score_source(&f, &small).unwrap();
        let s_large = score_source(&f, &large).unwrap();
        assert_eq!(s_small.unique_contribution, s_large.unique_contribution);
        assert!(s_large.combined < s_small.combined);
    }

    proptest! {
        /// Brute-force oracle over small random instances: every
        /// quantity recomputed with linear scans over Vecs instead of
        /// set operations.
        #[test]
        fn matches_brute_force_oracle(
            f_ids in proptest::collection::btree_set(0u8..60, 0..24),
            k_ids in proptest::collection::btree_set(0u8..60, 0..24),
        ) {
            let f_tokens: Vec<String> = f_ids.iter().map(|i| format!("t{i}")).collect();
            let k_tokens: Vec<String> = k_ids.iter().map(|i| format!("t{i}")).collect();
            let f_refs: Vec<&str> = f_tokens.iter().map(|s| s.as_str()).collect();
            let k_refs: Vec<&str> = k_tokens.iter().map(|s| s.as_str()).collect();
            let score = score_source(&filtered(&f_refs), &container(&k_refs)).unwrap();

            let mut expect_overlap = 0usize;
            for t in &f_tokens {
                if k_tokens.iter().any(|k| k == t) {
                    expect_overlap += 1;
                }
            }
            let expect_unique = f_tokens.len() - expect_overlap;

            prop_assert_eq!(score.overlap, expect_overlap);
            prop_assert_eq!(score.unique_contribution, expect_unique);
            prop_assert!(score.overlap <= f_tokens.len().min(k_tokens.len()));

            if f_tokens.is_empty() {
                prop_assert_eq!(score.density, 0.0);
            } else {
                prop_assert_eq!(score.density, expect_unique as f64 / f_tokens.len() as f64);
            }
            if k_tokens.is_empty() {
                prop_assert_eq!(score.increase, None);
            } else {
                prop_assert_eq!(score.increase, Some(expect_unique as f64 / k_tokens.len() as f64));
            }
            let expect_combined = if expect_unique == 0 {
                0.0
            } else {
                expect_unique as f64 / (1.0 + f_tokens.len() as f64 + k_tokens.len() as f64).ln()
            };
            let tolerance = 1e-12 * expect_combined.abs().max(1e-300);
            prop_assert!((score.combined - expect_combined).abs() <= tolerance);
        }

        /// Combined score is zero exactly when nothing new arrives.
        #[test]
        fn zero_combined_iff_zero_unique(
            f_ids in proptest::collection::btree_set(0u8..30, 0..16),
            k_ids in proptest::collection::btree_set(0u8..30, 0..16),
        ) {
            let f_tokens: Vec<String> = f_ids.iter().map(|i| format!("t{i}")).collect();
            let k_tokens: Vec<String> = k_ids.iter().map(|i| format!("t{i}")).collect();
            let f_refs: Vec<&str> = f_tokens.iter().map(|s| s.as_str()).collect();
            let k_refs: Vec<&str> = k_tokens.iter().map(|s| s.as_str()).collect();
            let score = score_source(&filtered(&f_refs), &container(&k_refs)).unwrap();
            prop_assert_eq!(score.combined == 0.0, score.unique_contribution == 0);
        }
    }
}
