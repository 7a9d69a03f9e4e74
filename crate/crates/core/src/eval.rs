//! Text-overlap metrics (ROUGE-1/2/L, BLEU), union-reference recall,
//! and the 0–5 level-of-detail measure, plus the bundled comparison
//! fixtures they run against.
//!
//! All text metrics tokenize with the metric policy — lowercased,
//! punctuation stripped, **no** stopword removal — so common words
//! count toward overlap, as they do in standard implementations.
//! Metrics that divide by reference size return `None` instead of a
//! number when the reference side is empty.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::tokenize::{tokenize, TokenPolicy};

/// One system's frozen answer to the comparison query, with the
/// entities it identified (as written — normalization happens at
/// comparison time via the reference's alias table).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemOutput {
    pub system: String,
    pub answer: String,
    pub entities: Vec<String>,
}

/// Canonical entity set plus the alias table that folds spelling
/// variants ("Beta-Thalassemia", "HPFH") onto canonical names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub canonical: Vec<String>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

/// Level-of-detail grade for one identified entity: 0 is a bare name,
/// 5 includes links to external resources.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelAnnotation {
    pub entity: String,
    pub level: u8,
    pub justification: String,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cross-system matrix needs at least two systems, got {0}")]
    TooFewSystems(usize),
    #[error("level {level} for {entity:?} is outside 0..=5")]
    LevelOutOfRange { entity: String, level: u8 },
    #[error("alias {alias:?} points to {canonical:?}, which is not a canonical name")]
    DanglingAlias { alias: String, canonical: String },
    #[error("canonical name {0:?} appears more than once after normalization")]
    DuplicateCanonical(String),
}

/// Entity-name normalization: composed unicode, lowercase, single
/// spaces. Punctuation is kept — "s/β" distinguishes compound states.
pub fn normalize_entity(name: &str) -> String {
    let composed: String = name.nfc().collect();
    composed.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

impl ReferenceSet {
    pub fn validate(&self) -> Result<(), EvalError> {
        let mut seen = BTreeSet::new();
        for name in &self.canonical {
            if !seen.insert(normalize_entity(name)) {
                return Err(EvalError::DuplicateCanonical(name.clone()));
            }
        }
        for (alias, canonical) in &self.aliases {
            if !seen.contains(&normalize_entity(canonical)) {
                return Err(EvalError::DanglingAlias {
                    alias: alias.clone(),
                    canonical: canonical.clone(),
                });
            }
        }
        Ok(())
    }

    /// Canonical names in normalized form.
    pub fn normalized_canonicals(&self) -> BTreeSet<String> {
        self.canonical.iter().map(|n| normalize_entity(n)).collect()
    }

    /// Folds a raw entity name onto its normalized canonical form,
    /// passing it through unchanged (but normalized) when no alias
    /// matches.
    pub fn resolve(&self, raw: &str) -> String {
        let normalized = normalize_entity(raw);
        for (alias, canonical) in &self.aliases {
            if normalize_entity(alias) == normalized {
                return normalize_entity(canonical);
            }
        }
        normalized
    }
}

/// Validates a batch of annotations against the 0–5 rubric.
pub fn validate_annotations(annotations: &[LevelAnnotation]) -> Result<(), EvalError> {
    for a in annotations {
        if a.level > 5 {
            return Err(EvalError::LevelOutOfRange { entity: a.entity.clone(), level: a.level });
        }
    }
    Ok(())
}

/// Precision/recall/F1 triple shared by the ROUGE variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_counts(matched: usize, candidate_total: usize, reference_total: usize) -> Self {
        let precision =
            if candidate_total == 0 { 0.0 } else { matched as f64 / candidate_total as f64 };
        let recall = matched as f64 / reference_total as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        RougeScore { precision, recall, f1 }
    }
}

fn metric_tokens(text: &str) -> Vec<String> {
    tokenize(text, &TokenPolicy::metric())
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

fn clipped_matches(candidate: &HashMap<&[String], usize>, reference: &HashMap<&[String], usize>) -> usize {
    candidate
        .iter()
        .map(|(gram, &count)| count.min(reference.get(gram).copied().unwrap_or(0)))
        .sum()
}

/// N-gram overlap ROUGE. `None` when the reference has no n-grams of
/// order `n` (the empty-reference case and its short-text
/// generalization — there is nothing to recall against).
pub fn rouge_n(candidate: &str, reference: &str, n: usize) -> Option<RougeScore> {
    assert!(n >= 1, "n-gram order must be at least 1");
    let cand = metric_tokens(candidate);
    let refr = metric_tokens(reference);
    if refr.len() < n {
        return None;
    }
    let ref_total = refr.len() - n + 1;
    let cand_total = cand.len().saturating_sub(n - 1);
    let cand_counts = ngram_counts(&cand, n);
    let ref_counts = ngram_counts(&refr, n);
    let matched = clipped_matches(&cand_counts, &ref_counts);
    Some(RougeScore::from_counts(matched, cand_total, ref_total))
}

/// Longest-common-subsequence ROUGE. `None` when the reference is
/// empty.
pub fn rouge_l(candidate: &str, reference: &str) -> Option<RougeScore> {
    let cand = metric_tokens(candidate);
    let refr = metric_tokens(reference);
    if refr.is_empty() {
        return None;
    }
    let lcs = lcs_length(&cand, &refr);
    Some(RougeScore::from_counts(lcs, cand.len(), refr.len()))
}

fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    // One rolling row: O(|a|·|b|) time, O(|b|) space.
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for token_a in a {
        for (j, token_b) in b.iter().enumerate() {
            curr[j + 1] = if token_a == token_b {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Sentence BLEU with uniform weights up to 4-grams. Unigram precision
/// is unsmoothed, so token-disjoint texts score exactly 0.0; higher
/// orders use add-one smoothing — (matches+1)/(total+1) — and orders
/// where the candidate has no n-grams at all fall back to the
/// smoothing ceiling of 1. Brevity penalty is e^(1−r/c) when the
/// candidate is shorter than the reference. An empty candidate scores
/// 0.0.
pub fn bleu(candidate: &str, reference: &str) -> f64 {
    bleu_with(candidate, reference, 4)
}

/// [`bleu`] with an explicit maximum n-gram order.
pub fn bleu_with(candidate: &str, reference: &str, max_n: usize) -> f64 {
    assert!(max_n >= 1, "max n-gram order must be at least 1");
    let cand = metric_tokens(candidate);
    let refr = metric_tokens(reference);
    if cand.is_empty() {
        return 0.0;
    }

    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts = ngram_counts(&refr, n);
        let matched = clipped_matches(&cand_counts, &ref_counts);
        let total = if cand.len() >= n { cand.len() - n + 1 } else { 0 };
        let p = if n == 1 {
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let geometric_mean = (log_sum / max_n as f64).exp();

    let c = cand.len() as f64;
    let r = refr.len() as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    brevity * geometric_mean
}

/// |normalized identified ∩ canonical| / |canonical|. `None` when the
/// reference is empty. Entities the reference does not know about
/// count against precision elsewhere, never against recall.
pub fn recall(output: &SystemOutput, reference: &ReferenceSet) -> Option<f64> {
    let canonicals = reference.normalized_canonicals();
    if canonicals.is_empty() {
        return None;
    }
    let identified: BTreeSet<String> =
        output.entities.iter().map(|e| reference.resolve(e)).collect();
    let hits = identified.intersection(&canonicals).count();
    Some(hits as f64 / canonicals.len() as f64)
}

/// Builds the pseudo-ground-truth: the union of every system's
/// normalized entities. The alias table is retained for later
/// `resolve` calls, minus any entry whose canonical never appears —
/// keeping the validation invariant by construction.
pub fn union_reference(outputs: &[SystemOutput], aliases: &BTreeMap<String, String>) -> ReferenceSet {
    let lookup = ReferenceSet { canonical: Vec::new(), aliases: aliases.clone() };
    let mut seen = BTreeSet::new();
    let mut canonical = Vec::new();
    for output in outputs {
        for entity in &output.entities {
            let resolved = lookup.resolve(entity);
            if seen.insert(resolved.clone()) {
                canonical.push(resolved);
            }
        }
    }
    let aliases = aliases
        .iter()
        .filter(|(_, target)| seen.contains(&normalize_entity(target)))
        .map(|(a, c)| (a.clone(), c.clone()))
        .collect();
    ReferenceSet { canonical, aliases }
}

/// Mean level over one system's annotations; `None` when there are
/// none to average.
pub fn level_average(annotations: &[LevelAnnotation]) -> Option<f64> {
    if annotations.is_empty() {
        return None;
    }
    let sum: u32 = annotations.iter().map(|a| a.level as u32).sum();
    Some(sum as f64 / annotations.len() as f64)
}

/// One row of the cross-system matrix: this system's answer served as
/// the reference, every other system's answer as candidate, metrics
/// averaged over those candidates. ROUGE cells are `None` only when
/// no candidate pairing was defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemAverages {
    pub system: String,
    pub rouge1: Option<f64>,
    pub rouge2: Option<f64>,
    pub rouge_l: Option<f64>,
    pub bleu: f64,
}

/// Averages each metric for every system acting as the reference,
/// over all other systems' answers as candidates.
pub fn cross_system_matrix(outputs: &[SystemOutput]) -> Result<Vec<SystemAverages>, EvalError> {
    if outputs.len() < 2 {
        return Err(EvalError::TooFewSystems(outputs.len()));
    }
    let mut rows = Vec::with_capacity(outputs.len());
    for reference in outputs {
        let mut r1 = Vec::new();
        let mut r2 = Vec::new();
        let mut rl = Vec::new();
        let mut bl = Vec::new();
        for candidate in outputs {
            if candidate.system == reference.system {
                continue;
            }
            if let Some(s) = rouge_n(&candidate.answer, &reference.answer, 1) {
                r1.push(s.f1);
            }
            if let Some(s) = rouge_n(&candidate.answer, &reference.answer, 2) {
                r2.push(s.f1);
            }
            if let Some(s) = rouge_l(&candidate.answer, &reference.answer) {
                rl.push(s.f1);
            }
            bl.push(bleu(&candidate.answer, &reference.answer));
        }
        let mean = |v: &[f64]| {
            if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) }
        };
        rows.push(SystemAverages {
            system: reference.system.clone(),
            rouge1: mean(&r1),
            rouge2: mean(&r2),
            rouge_l: mean(&rl),
            bleu: bl.iter().sum::<f64>() / bl.len() as f64,
        });
    }
    Ok(rows)
}

/// The frozen comparison data: five system answers to the HBB disease
/// query, the 19-disease pseudo-ground-truth, and per-system
/// level-of-detail annotations. See `fixtures/README.md` for
/// provenance notes — in particular, per-entity levels are a labeled
/// reconstruction; the per-system averages are the anchored values.
pub mod fixtures {
    use super::{LevelAnnotation, ReferenceSet, SystemOutput};

    pub const SYSTEM_WISE: &str = include_str!("../fixtures/system_wise.json");
    pub const SYSTEM_CHATGPT: &str = include_str!("../fixtures/system_chatgpt.json");
    pub const SYSTEM_CHATGPT_SEARCH: &str = include_str!("../fixtures/system_chatgpt_search.json");
    pub const SYSTEM_GEMINI: &str = include_str!("../fixtures/system_gemini.json");
    pub const SYSTEM_GOOGLE: &str = include_str!("../fixtures/system_google.json");
    pub const DISEASE_REFERENCE: &str = include_str!("../fixtures/disease_reference.json");
    pub const LEVELS_WISE: &str = include_str!("../fixtures/levels_wise.json");
    pub const LEVELS_CHATGPT: &str = include_str!("../fixtures/levels_chatgpt.json");
    pub const LEVELS_CHATGPT_SEARCH: &str = include_str!("../fixtures/levels_chatgpt_search.json");
    pub const LEVELS_GEMINI: &str = include_str!("../fixtures/levels_gemini.json");
    pub const LEVELS_GOOGLE: &str = include_str!("../fixtures/levels_google.json");

    /// All five outputs, the extraction system first.
    pub fn system_outputs() -> Vec<SystemOutput> {
        [SYSTEM_WISE, SYSTEM_CHATGPT, SYSTEM_CHATGPT_SEARCH, SYSTEM_GEMINI, SYSTEM_GOOGLE]
            .iter()
            .map(|s| serde_json::from_str(s).expect("bundled system fixture parses"))
            .collect()
    }

    /// The 19-disease union reference with its alias table.
    pub fn disease_reference() -> ReferenceSet {
        let set: ReferenceSet =
            serde_json::from_str(DISEASE_REFERENCE).expect("bundled reference fixture parses");
        set.validate().expect("bundled reference fixture is internally consistent");
        set
    }

    /// Level annotations keyed by system id, in the same order as
    /// [`system_outputs`].
    pub fn level_annotations() -> Vec<(String, Vec<LevelAnnotation>)> {
        [
            ("wise", LEVELS_WISE),
            ("chatgpt", LEVELS_CHATGPT),
            ("chatgpt-search", LEVELS_CHATGPT_SEARCH),
            ("gemini", LEVELS_GEMINI),
            ("google", LEVELS_GOOGLE),
        ]
        .iter()
        .map(|(system, json)| {
            let annotations: Vec<LevelAnnotation> =
                serde_json::from_str(json).expect("bundled annotation fixture parses");
            super::validate_annotations(&annotations)
                .expect("bundled annotation fixture is within the rubric");
            (system.to_string(), annotations)
        })
        .collect()
    }
}
