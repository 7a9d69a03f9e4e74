//! Synthetic linked-document corpora with planted facts and
//! controlled noise, served through an in-memory [`ContentProvider`].
//!
//! The generator is built so engine behavior is provable rather than
//! plausible: noise sentences share no content tokens with the query
//! vocabulary (a correct extractive filter must drop them), fact
//! carriers have unique token signatures (container membership is
//! plain set inclusion), and the repetition fraction rises with depth
//! (deeper layers contribute less, so scores decay and the threshold
//! guard fires before the corpus runs out).
//!
//! Layer-one documents double as the seed list. Documents at indices
//! 0 and 1 of each level are "prime": every parent links them first,
//! repeated sentences are drawn only from prime content, and their
//! URIs sort first so score ties resolve toward them. Facts are
//! planted in primes, which keeps them on top-scoring branches.

use std::collections::HashMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fetch::{ContentProvider, ProviderError};
use crate::tokenize::{token_set, StopwordFileError, TokenPolicy};
use crate::types::{
    EngineConfig, FetchStatus, KnowledgeContainer, Query, RawContent, RunTrace, Section, SourceRef,
};

/// Words every relevant sentence draws from; the query asks for all
/// of them. Noise sentences never contain any of these.
pub const QUERY_VOCAB: [&str; 6] = ["relay", "cascade", "signal", "flux", "conduit", "lattice"];

/// Content sentences per document before noise is added.
const CONTENT_PER_DOC: usize = 4;
/// Fresh tokens introduced by each fresh content sentence.
const FRESH_PER_SENTENCE: usize = 3;
/// Fresh tokens introduced by each noise sentence. Tuned so that a
/// perfect filter removes roughly 80% of each document's distinct
/// tokens at `noise_ratio` 0.8.
const NOISE_FRESH_PER_SENTENCE: usize = 5;
/// Anchor phrase shared by every link; it must survive filtering, so
/// it contains a query word.
const LINK_ANCHOR: &str = "the relay survey continues in a linked chapter";

/// A fact planted into one document at a given corpus level. The
/// carrier sentence should contain at least one query-vocabulary word
/// (or the filter will drop it) and distinctive marker tokens (or
/// recall becomes undecidable by token inclusion).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedFact {
    pub id: String,
    pub carrier: String,
    pub depth: u32,
}

impl PlantedFact {
    /// A carrier with the conventional marker signature:
    /// `finding <id>` plus three `<id>`-prefixed marker tokens.
    pub fn with_markers(id: &str, depth: u32) -> Self {
        PlantedFact {
            id: id.to_string(),
            carrier: format!(
                "the relay cascade confirms finding {id} with markers {id}x {id}y and {id}z."
            ),
            depth,
        }
    }
}

/// Shape of a generated corpus. Levels are 1-based: level 1 documents
/// are the seeds, level `depth` documents are leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub depth: u32,
    /// Outgoing links per non-leaf document (capped by the next
    /// level's population).
    pub branching: usize,
    pub docs_per_layer: usize,
    /// Fraction of each document's sentences that are noise.
    pub noise_ratio: f64,
    /// Base repetition rate. A document at level `l` has
    /// `min(1, overlap_ratio × (l−1))` of its content sentences
    /// repeated from shallower prime documents, so repetition rises
    /// with depth and unique contributions shrink.
    pub overlap_ratio: f64,
    pub facts: Vec<PlantedFact>,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if self.depth < 1 {
            return Err(SpecError::Depth);
        }
        if self.docs_per_layer < 1 || self.docs_per_layer > 100 {
            return Err(SpecError::DocsPerLayer(self.docs_per_layer));
        }
        if !(0.0..1.0).contains(&self.noise_ratio) {
            return Err(SpecError::NoiseRatio(self.noise_ratio));
        }
        if !(0.0..=1.0).contains(&self.overlap_ratio) {
            return Err(SpecError::OverlapRatio(self.overlap_ratio));
        }
        let mut ids = std::collections::BTreeSet::new();
        for fact in &self.facts {
            if fact.id.trim().is_empty() || fact.carrier.trim().is_empty() {
                return Err(SpecError::EmptyFact);
            }
            if !ids.insert(fact.id.as_str()) {
                return Err(SpecError::DuplicateFact(fact.id.clone()));
            }
            if fact.depth < 1 || fact.depth > self.depth {
                return Err(SpecError::FactDepth { id: fact.id.clone(), depth: fact.depth });
            }
        }
        Ok(())
    }

    /// The demonstration corpus: three levels, eighty percent noise,
    /// repetition rising toward full repeats at the leaves, and four
    /// facts planted in prime documents of the first two levels.
    pub fn demo() -> Self {
        CorpusSpec {
            depth: 3,
            branching: 5,
            docs_per_layer: 8,
            noise_ratio: 0.8,
            overlap_ratio: 0.45,
            facts: vec![
                PlantedFact::with_markers("f01", 1),
                PlantedFact::with_markers("f02", 1),
                PlantedFact::with_markers("f03", 2),
                PlantedFact::with_markers("f04", 2),
            ],
            seed: 42,
        }
    }
}

/// Engine settings matched to [`CorpusSpec::demo`]: the threshold
/// sits between the measured layer-1 and layer-2 maxima, so the run
/// stops via the guard with the leaf layer scored but unmerged.
pub fn demo_engine_config() -> EngineConfig {
    EngineConfig {
        threshold: 1.5,
        top_k: 2,
        max_layers: 6,
        politeness_delay_ms: 0,
        ..EngineConfig::default()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("depth must be at least 1")]
    Depth,
    #[error("docs_per_layer must be in 1..=100, got {0}")]
    DocsPerLayer(usize),
    #[error("noise_ratio must be in [0, 1), got {0}")]
    NoiseRatio(f64),
    #[error("overlap_ratio must be in [0, 1], got {0}")]
    OverlapRatio(f64),
    #[error("facts need a non-empty id and carrier")]
    EmptyFact,
    #[error("fact id {0:?} is planted twice")]
    DuplicateFact(String),
    #[error("fact {id:?} planted at depth {depth}, outside the corpus")]
    FactDepth { id: String, depth: u32 },
}

/// One generated document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimDocument {
    pub id: String,
    pub uri: String,
    /// 1-based corpus level (distinct from 0-based trace layers).
    pub level: u32,
    pub text: String,
    /// Child URIs, prime targets first.
    pub links: Vec<String>,
    pub fact_ids: Vec<String>,
    pub relevant_sentences: usize,
    pub noise_sentences: usize,
}

/// A complete corpus: the [`CorpusSpec`] that produced it, the query
/// it answers, and every document. Immutable after generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub spec: CorpusSpec,
    pub query: String,
    pub documents: Vec<SimDocument>,
}

impl CorpusManifest {
    /// Level-one documents as seed references, in index order.
    pub fn seeds(&self) -> Vec<SourceRef> {
        self.documents
            .iter()
            .filter(|d| d.level == 1)
            .map(|d| SourceRef::seed(&d.uri))
            .collect()
    }

    /// The query the corpus was built to answer.
    pub fn query(&self) -> Query {
        Query::new("sim", &self.query).expect("generated query is never empty")
    }
}

fn doc_uri(level: u32, index: usize) -> String {
    format!("sim://corpus/l{level}d{index:02}")
}

/// Deterministically expands a spec into a corpus. The same spec
/// (including the seed) always yields a byte-identical manifest.
pub fn generate(spec: &CorpusSpec) -> Result<CorpusManifest, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut fresh_counter: u64 = 0;
    let mut noise_counter: u64 = 0;
    // Content sentences of prime documents at strictly shallower
    // levels: the pool deeper documents repeat from.
    let mut prime_pool: Vec<String> = Vec::new();
    let mut documents = Vec::new();

    for level in 1..=spec.depth {
        let q = if level == 1 {
            0.0
        } else {
            (spec.overlap_ratio * (level - 1) as f64).min(1.0)
        };
        let repeated_count = ((q * CONTENT_PER_DOC as f64).round() as usize).min(CONTENT_PER_DOC);
        let fresh_count = CONTENT_PER_DOC - repeated_count;
        let has_links = level < spec.depth && spec.branching > 0;
        let mut level_prime_pool: Vec<String> = Vec::new();

        for index in 0..spec.docs_per_layer {
            let mut relevant: Vec<String> = Vec::new();
            let mut fact_ids = Vec::new();

            // Facts planted at this level alternate between the two
            // prime documents.
            for (k, fact) in spec.facts.iter().filter(|f| f.depth == level).enumerate() {
                let target = k % spec.docs_per_layer.min(2);
                if target == index {
                    relevant.push(fact.carrier.clone());
                    fact_ids.push(fact.id.clone());
                }
            }

            let mut content: Vec<String> = Vec::new();
            for s in 0..fresh_count {
                let vocab_a = QUERY_VOCAB[(level as usize + s) % QUERY_VOCAB.len()];
                let vocab_b = QUERY_VOCAB[(level as usize + s + 1) % QUERY_VOCAB.len()];
                let f1 = format!("rv{:05}", fresh_counter);
                let f2 = format!("rv{:05}", fresh_counter + 1);
                let f3 = format!("rv{:05}", fresh_counter + 2);
                fresh_counter += FRESH_PER_SENTENCE as u64;
                content.push(format!(
                    "the {vocab_a} {vocab_b} study records {f1} {f2} {f3} readings."
                ));
            }
            for _ in 0..repeated_count {
                let repeat = prime_pool
                    .choose(&mut rng)
                    .expect("repeats only requested at levels 2+, where primes exist")
                    .clone();
                content.push(repeat);
            }
            if index < 2 {
                // Only fresh sentences enter the pool; repeating a
                // repeat would double-count shallower content.
                level_prime_pool.extend(content.iter().take(fresh_count).cloned());
            }
            relevant.append(&mut content);
            if has_links {
                relevant.push(format!("{LINK_ANCHOR}."));
            }

            let relevant_count = relevant.len();
            let noise_count = (spec.noise_ratio / (1.0 - spec.noise_ratio)
                * relevant_count as f64)
                .round() as usize;
            let mut sentences = relevant;
            for _ in 0..noise_count {
                let z: Vec<String> = (0..NOISE_FRESH_PER_SENTENCE)
                    .map(|i| format!("zq{:05}", noise_counter + i as u64))
                    .collect();
                noise_counter += NOISE_FRESH_PER_SENTENCE as u64;
                sentences.push(format!(
                    "the {} ledger remarks that {} entries stay near {} while {} and {} hold.",
                    z[0], z[1], z[2], z[3], z[4]
                ));
            }
            sentences.shuffle(&mut rng);

            let links: Vec<String> = if has_links {
                let next = level + 1;
                let prime_targets = spec.docs_per_layer.min(2);
                let mut targets: Vec<usize> = (0..prime_targets).collect();
                let extra = spec
                    .branching
                    .min(spec.docs_per_layer)
                    .saturating_sub(prime_targets);
                if extra > 0 {
                    let others: Vec<usize> = (prime_targets..spec.docs_per_layer).collect();
                    let mut sampled: Vec<usize> =
                        others.choose_multiple(&mut rng, extra).copied().collect();
                    sampled.sort_unstable();
                    targets.extend(sampled);
                }
                targets.into_iter().map(|i| doc_uri(next, i)).collect()
            } else {
                Vec::new()
            };

            documents.push(SimDocument {
                id: format!("l{level}d{index:02}"),
                uri: doc_uri(level, index),
                level,
                text: sentences.join(" "),
                links,
                fact_ids,
                relevant_sentences: relevant_count,
                noise_sentences: noise_count,
            });
        }
        prime_pool.append(&mut level_prime_pool);
    }

    Ok(CorpusManifest {
        spec: spec.clone(),
        query: QUERY_VOCAB.join(" "),
        documents,
    })
}

/// Serves a generated corpus as content: pure lookup, no network, no
/// failures other than unknown URIs.
pub struct ManifestProvider<'a> {
    manifest: &'a CorpusManifest,
    by_uri: HashMap<&'a str, usize>,
}

impl<'a> ManifestProvider<'a> {
    pub fn new(manifest: &'a CorpusManifest) -> Self {
        let by_uri =
            manifest.documents.iter().enumerate().map(|(i, d)| (d.uri.as_str(), i)).collect();
        Self { manifest, by_uri }
    }
}

impl ContentProvider for ManifestProvider<'_> {
    fn resolve(&self, source: &SourceRef) -> Result<RawContent, ProviderError> {
        let &index = self
            .by_uri
            .get(source.uri.as_str())
            .ok_or_else(|| ProviderError::NotFound(source.uri.clone()))?;
        let doc = &self.manifest.documents[index];
        Ok(RawContent {
            source: source.clone(),
            text: doc.text.clone(),
            links: doc
                .links
                .iter()
                .map(|uri| SourceRef::child_of(source, uri, Some(LINK_ANCHOR.to_string())))
                .collect(),
            sections: vec![Section { id: "body".into(), text: doc.text.clone() }],
            fetched_at: 0,
            status: FetchStatus::Ok,
        })
    }
}

/// What a run achieved against the corpus that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimMeasure {
    /// Planted facts whose carrier tokens all appear in the final
    /// container, over all planted facts. `None` when no facts were
    /// planted.
    pub fact_recall: Option<f64>,
    pub facts_found: usize,
    pub facts_total: usize,
    /// Token volume of fetched documents over the whole corpus.
    pub processed_text_fraction: f64,
    /// Mean per-source distinct-token reduction achieved by the
    /// filter, over sources that were fetched with non-empty text.
    pub mean_filter_reduction: Option<f64>,
    /// Trace layers that evaluated at least one source.
    pub layers_explored: usize,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("container was built under policy {actual}, expected {expected}")]
    PolicyMismatch { expected: String, actual: String },
    #[error("cannot resolve the run's stopword policy: {0}")]
    Stopwords(#[from] StopwordFileError),
}

/// Scores a finished run against its corpus. The tokenization policy
/// is resolved from the trace's configuration and checked against the
/// container fingerprint, so measurements can't silently mix token
/// spaces.
pub fn measure(
    trace: &RunTrace,
    container: &KnowledgeContainer,
    manifest: &CorpusManifest,
) -> Result<SimMeasure, SimError> {
    let policy = TokenPolicy::scoring_with(&trace.config.stopword_policy)?;
    if policy.fingerprint() != container.policy_fingerprint {
        return Err(SimError::PolicyMismatch {
            expected: policy.fingerprint(),
            actual: container.policy_fingerprint.clone(),
        });
    }

    let facts_total = manifest.spec.facts.len();
    let facts_found = manifest
        .spec
        .facts
        .iter()
        .filter(|fact| token_set(&fact.carrier, &policy).is_subset(&container.tokens))
        .count();
    let fact_recall =
        if facts_total == 0 { None } else { Some(facts_found as f64 / facts_total as f64) };

    let corpus_volume: usize =
        manifest.documents.iter().map(|d| token_set(&d.text, &policy).len()).sum();
    let fetched_volume: usize = trace
        .layers
        .iter()
        .flat_map(|l| l.sources.iter())
        .filter(|s| s.status == FetchStatus::Ok)
        .map(|s| s.raw_token_count)
        .sum();
    let processed_text_fraction =
        if corpus_volume == 0 { 0.0 } else { fetched_volume as f64 / corpus_volume as f64 };

    let reductions: Vec<f64> = trace
        .layers
        .iter()
        .flat_map(|l| l.sources.iter())
        .filter(|s| s.status == FetchStatus::Ok && s.raw_token_count > 0)
        .map(|s| 1.0 - s.filtered_word_count as f64 / s.raw_token_count as f64)
        .collect();
    let mean_filter_reduction = if reductions.is_empty() {
        None
    } else {
        Some(reductions.iter().sum::<f64>() / reductions.len() as f64)
    };

    let layers_explored = trace.layers.iter().filter(|l| !l.sources.is_empty()).count();

    Ok(SimMeasure {
        fact_recall,
        facts_found,
        facts_total,
        processed_text_fraction,
        mean_filter_reduction,
        layers_explored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, SetUnionFusion};
    use crate::filter::ExtractiveFilter;
    use crate::types::TerminationReason;

    fn tiny_spec() -> CorpusSpec {
        CorpusSpec {
            depth: 2,
            branching: 2,
            docs_per_layer: 3,
            noise_ratio: 0.5,
            overlap_ratio: 0.25,
            facts: vec![PlantedFact::with_markers("f01", 1)],
            seed: 7,
        }
    }

    fn run_corpus(
        manifest: &CorpusManifest,
        config: EngineConfig,
    ) -> (KnowledgeContainer, RunTrace) {
        let provider = ManifestProvider::new(manifest);
        let filter = ExtractiveFilter::with_defaults(TokenPolicy::scoring());
        static FUSION: SetUnionFusion = SetUnionFusion;
        let engine = Engine::new(config, &provider, &filter, &FUSION).unwrap();
        engine.run(&manifest.query(), &manifest.seeds()).unwrap()
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let spec = tiny_spec();
        let a = serde_json::to_vec(&generate(&spec).unwrap()).unwrap();
        let b = serde_json::to_vec(&generate(&spec).unwrap()).unwrap();
        assert_eq!(a, b);

        let reseeded = CorpusSpec { seed: 8, ..spec };
        let c = serde_json::to_vec(&generate(&reseeded).unwrap()).unwrap();
        assert_ne!(a, c, "different seed must shuffle differently");
    }

    #[test]
    fn single_document_corpus() {
        let spec = CorpusSpec {
            depth: 1,
            branching: 0,
            docs_per_layer: 1,
            noise_ratio: 0.0,
            overlap_ratio: 0.0,
            facts: vec![],
            seed: 1,
        };
        let manifest = generate(&spec).unwrap();
        assert_eq!(manifest.documents.len(), 1);
        let doc = &manifest.documents[0];
        assert!(doc.links.is_empty());
        assert_eq!(doc.noise_sentences, 0);
        assert!(!doc.text.is_empty());
        assert_eq!(manifest.seeds().len(), 1);
    }

    #[test]
    fn noise_ratio_is_exact_per_document_at_four_fifths() {
        let spec = CorpusSpec {
            depth: 2,
            branching: 2,
            docs_per_layer: 4,
            noise_ratio: 0.8,
            overlap_ratio: 0.3,
            facts: vec![PlantedFact::with_markers("f01", 1)],
            seed: 3,
        };
        let manifest = generate(&spec).unwrap();
        for doc in &manifest.documents {
            assert_eq!(
                doc.noise_sentences,
                4 * doc.relevant_sentences,
                "doc {} must be exactly 80% noise",
                doc.id
            );
            let total = doc.noise_sentences + doc.relevant_sentences;
            let ratio = doc.noise_sentences as f64 / total as f64;
            assert_eq!(ratio, 0.8, "doc {}", doc.id);
        }
    }

    #[test]
    fn noise_sentences_share_no_tokens_with_query_vocabulary() {
        let manifest = generate(&CorpusSpec::demo()).unwrap();
        let policy = TokenPolicy::scoring();
        for doc in &manifest.documents {
            let tokens = token_set(&doc.text, &policy);
            // Noise tokens are zq-prefixed by construction; every
            // query word that appears came from a relevant sentence.
            for noise_token in tokens.iter().filter(|t| t.starts_with("zq")) {
                assert!(!QUERY_VOCAB.contains(&noise_token.as_str()));
            }
        }
    }

    #[test]
    fn every_fact_is_planted_in_some_document() {
        let manifest = generate(&CorpusSpec::demo()).unwrap();
        for fact in &manifest.spec.facts {
            let host = manifest
                .documents
                .iter()
                .find(|d| d.fact_ids.contains(&fact.id))
                .unwrap_or_else(|| panic!("fact {} not planted", fact.id));
            assert!(host.text.contains(&fact.carrier), "carrier sentence present verbatim");
            assert_eq!(host.level, fact.depth);
            let index: usize = host.id[host.id.find('d').unwrap() + 1..].parse().unwrap();
            assert!(index < 2, "facts land in prime documents, got {}", host.id);
        }
    }

    #[test]
    fn link_graph_respects_layering() {
        let manifest = generate(&CorpusSpec::demo()).unwrap();
        let by_uri: HashMap<&str, &SimDocument> =
            manifest.documents.iter().map(|d| (d.uri.as_str(), d)).collect();
        for doc in &manifest.documents {
            if doc.level == manifest.spec.depth {
                assert!(doc.links.is_empty(), "leaves have no links");
            } else {
                assert_eq!(doc.links.len(), manifest.spec.branching.min(manifest.spec.docs_per_layer));
                for link in &doc.links {
                    assert_eq!(by_uri[link.as_str()].level, doc.level + 1);
                }
                // Primes first.
                assert!(doc.links[0].ends_with("d00"));
                assert!(doc.links[1].ends_with("d01"));
            }
        }
    }

    #[test]
    fn resolve_returns_documents_and_rejects_unknown_uris() {
        let manifest = generate(&tiny_spec()).unwrap();
        let provider = ManifestProvider::new(&manifest);

        let root = provider.resolve(&SourceRef::seed("sim://corpus/l1d00")).unwrap();
        assert_eq!(root.status, FetchStatus::Ok);
        assert_eq!(root.links.len(), 2);
        assert!(root.links.iter().all(|l| l.parent.as_deref() == Some("sim://corpus/l1d00")));

        let leaf = provider.resolve(&SourceRef::seed("sim://corpus/l2d01")).unwrap();
        assert!(leaf.links.is_empty());

        let missing = provider.resolve(&SourceRef::seed("sim://corpus/l9d99"));
        assert!(matches!(missing, Err(ProviderError::NotFound(_))));
    }

    #[test]
    fn full_overlap_forces_threshold_termination_at_layer_one() {
        let spec = CorpusSpec {
            depth: 3,
            branching: 3,
            docs_per_layer: 4,
            noise_ratio: 0.5,
            overlap_ratio: 1.0,
            facts: vec![PlantedFact::with_markers("f01", 1)],
            seed: 11,
        };
        let manifest = generate(&spec).unwrap();
        let config = EngineConfig {
            threshold: 2.0,
            top_k: 2,
            max_layers: 6,
            politeness_delay_ms: 0,
            ..EngineConfig::default()
        };
        let (_, trace) = run_corpus(&manifest, config);
        assert_eq!(trace.layers.len(), 2, "level-2 documents repeat everything");
        assert_eq!(trace.layers[1].termination, Some(TerminationReason::Threshold));
        let layer1_max = trace.layers[1]
            .sources
            .iter()
            .map(|s| s.score.combined)
            .fold(0.0_f64, f64::max);
        assert_eq!(layer1_max, 0.0, "full repetition leaves zero unique contribution");
    }

    #[test]
    fn infinite_threshold_stops_after_scoring_the_seeds() {
        let manifest = generate(&tiny_spec()).unwrap();
        let config = EngineConfig {
            threshold: f64::INFINITY,
            politeness_delay_ms: 0,
            ..EngineConfig::default()
        };
        let (container, trace) = run_corpus(&manifest, config);
        assert_eq!(container.size, 0, "nothing merged when the guard fires immediately");
        let m = measure(&trace, &container, &manifest).unwrap();
        assert_eq!(m.layers_explored, 1);
        assert_eq!(m.fact_recall, Some(0.0));
        assert!(m.processed_text_fraction > 0.0, "seeds were still fetched");
    }

    #[test]
    fn zero_threshold_explores_everything_reachable_and_recalls_all_facts() {
        let spec = CorpusSpec {
            depth: 3,
            branching: 4,
            docs_per_layer: 4,
            noise_ratio: 0.5,
            overlap_ratio: 0.2,
            facts: vec![
                PlantedFact::with_markers("f01", 1),
                PlantedFact::with_markers("f02", 2),
                PlantedFact::with_markers("f03", 3),
            ],
            seed: 5,
        };
        let manifest = generate(&spec).unwrap();
        let config = EngineConfig {
            threshold: 0.0,
            top_k: 2,
            max_layers: 3,
            politeness_delay_ms: 0,
            ..EngineConfig::default()
        };
        let (container, trace) = run_corpus(&manifest, config);
        let m = measure(&trace, &container, &manifest).unwrap();
        assert_eq!(m.fact_recall, Some(1.0), "{m:?}");
        assert_eq!(m.layers_explored, 3);
    }

    #[test]
    fn fact_recall_never_decreases_with_deeper_exploration() {
        let manifest = generate(&CorpusSpec::demo()).unwrap();
        let mut previous = -1.0;
        for max_layers in 1..=4 {
            let config = EngineConfig {
                threshold: 0.0,
                top_k: 2,
                max_layers,
                politeness_delay_ms: 0,
                ..EngineConfig::default()
            };
            let (container, trace) = run_corpus(&manifest, config);
            let recall = measure(&trace, &container, &manifest).unwrap().fact_recall.unwrap();
            assert!(recall >= previous, "max_layers {max_layers}: {recall} < {previous}");
            previous = recall;
        }
    }

    #[test]
    fn fact_recall_never_increases_with_a_stricter_threshold() {
        let manifest = generate(&CorpusSpec::demo()).unwrap();
        let mut previous = 2.0;
        for threshold in [0.0, 1.5, 4.0, f64::INFINITY] {
            let config = EngineConfig {
                threshold,
                top_k: 2,
                max_layers: 6,
                politeness_delay_ms: 0,
                ..EngineConfig::default()
            };
            let (container, trace) = run_corpus(&manifest, config);
            let recall = measure(&trace, &container, &manifest).unwrap().fact_recall.unwrap();
            assert!(recall <= previous, "threshold {threshold}: {recall} > {previous}");
            previous = recall;
        }
    }

    #[test]
    fn raising_overlap_never_delays_termination() {
        let mut previous_layers = usize::MAX;
        for overlap in [0.2, 0.5, 0.8, 1.0] {
            let spec = CorpusSpec {
                overlap_ratio: overlap,
                facts: vec![],
                ..CorpusSpec::demo()
            };
            let manifest = generate(&spec).unwrap();
            let (container, trace) = run_corpus(&manifest, demo_engine_config());
            let m = measure(&trace, &container, &manifest).unwrap();
            assert!(
                m.layers_explored <= previous_layers,
                "overlap {overlap} explored {} layers, more than {previous_layers}",
                m.layers_explored
            );
            previous_layers = m.layers_explored;
        }
    }

    #[test]
    fn demo_corpus_meets_the_headline_targets() {
        let manifest = generate(&CorpusSpec::demo()).unwrap();
        let (container, trace) = run_corpus(&manifest, demo_engine_config());
        let m = measure(&trace, &container, &manifest).unwrap();

        assert_eq!(trace.termination(), Some(TerminationReason::Threshold));
        assert!(
            (trace.layers.len() as usize) < demo_engine_config().max_layers,
            "guard must fire before the layer cap"
        );
        assert!(m.fact_recall.unwrap() >= 0.9, "{m:?}");
        assert!(m.mean_filter_reduction.unwrap() >= 0.75, "{m:?}");

        let max_scores: Vec<f64> = trace
            .layers
            .iter()
            .filter(|l| !l.sources.is_empty())
            .map(|l| l.sources.iter().map(|s| s.score.combined).fold(0.0_f64, f64::max))
            .collect();
        for pair in max_scores.windows(2) {
            assert!(pair[1] < pair[0], "max scores must strictly decrease: {max_scores:?}");
        }
        assert!(trace.violations().is_empty(), "{:?}", trace.violations());
    }

    #[test]
    fn measure_rejects_a_container_from_another_policy() {
        let manifest = generate(&tiny_spec()).unwrap();
        let (_, trace) = run_corpus(&manifest, demo_engine_config());
        let foreign = KnowledgeContainer::empty("0123456789abcdef".to_string());
        assert!(matches!(
            measure(&trace, &foreign, &manifest),
            Err(SimError::PolicyMismatch { .. })
        ));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let base = tiny_spec();
        assert_eq!(generate(&CorpusSpec { depth: 0, ..base.clone() }).unwrap_err(), SpecError::Depth);
        assert!(matches!(
            generate(&CorpusSpec { noise_ratio: 1.0, ..base.clone() }).unwrap_err(),
            SpecError::NoiseRatio(_)
        ));
        assert!(matches!(
            generate(&CorpusSpec { overlap_ratio: 1.1, ..base.clone() }).unwrap_err(),
            SpecError::OverlapRatio(_)
        ));
        assert!(matches!(
            generate(&CorpusSpec {
                facts: vec![PlantedFact::with_markers("f09", 9)],
                ..base.clone()
            })
            .unwrap_err(),
            SpecError::FactDepth { .. }
        ));
        assert!(matches!(
            generate(&CorpusSpec {
                facts: vec![PlantedFact::with_markers("f01", 1), PlantedFact::with_markers("f01", 2)],
                ..base
            })
            .unwrap_err(),
            SpecError::DuplicateFact(_)
        ));
    }
}
