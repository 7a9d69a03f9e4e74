//! The recursive exploration loop: per layer, fetch and filter every
//! source concurrently, score the whole layer against the frozen
//! container, apply the termination guard, select the top k, fuse
//! their content, and discover the next layer from links surviving in
//! the selected filtered content.
//!
//! Guard ordering: the entire current layer is evaluated first, then
//! the guard fires if the best combined score is below the threshold —
//! and a below-threshold layer's content is never merged; the final
//! container is the one after the last above-threshold fusion.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use crate::fetch::ContentProvider;
use crate::filter::{filtered_links, verbatim_fraction, FilterInterface};
use crate::score::{score_source, PolicyMismatch};
use crate::tokenize::{token_set, TokenPolicy};
use crate::types::{
    ConfigError, ContainerSegment, EngineConfig, FetchStatus, FilterMode, FilteredContent,
    KnowledgeContainer, LayerRecord, Query, RunTrace, SourceOutcome, SourceRef, SourceScore,
    TerminationReason,
};

/// Merges selected filtered content into the container. The engine
/// enforces on every implementation that the output token set is a
/// superset of the input's and stays internally consistent.
pub trait FusionInterface: Send + Sync {
    fn merge(&self, container: &KnowledgeContainer, selected: &[&FilteredContent]) -> KnowledgeContainer;
}

/// Default fusion: exact token-set union, with segments appended in
/// selection order and sentences already present verbatim skipped.
pub struct SetUnionFusion;

impl FusionInterface for SetUnionFusion {
    fn merge(&self, container: &KnowledgeContainer, selected: &[&FilteredContent]) -> KnowledgeContainer {
        let mut merged = container.clone();
        let mut seen: BTreeSet<&str> = container.segments.iter().map(|s| s.text.as_str()).collect();
        for content in selected {
            merged.tokens.extend(content.tokens.iter().cloned());
            for segment in &content.segments {
                if seen.contains(segment.as_str()) {
                    continue;
                }
                merged.segments.push(ContainerSegment {
                    text: segment.clone(),
                    source_uri: content.source.uri.clone(),
                    layer: content.source.layer,
                });
            }
            seen.extend(content.segments.iter().map(|s| s.as_str()));
        }
        merged.size = merged.tokens.len();
        merged
    }
}

/// [`SetUnionFusion`] as a plain function.
pub fn merge_default(container: &KnowledgeContainer, selected: &[&FilteredContent]) -> KnowledgeContainer {
    SetUnionFusion.merge(container, selected)
}

/// Ranks and truncates: descending combined score, ties broken by
/// higher unique contribution, then lexicographic URI. Returns fewer
/// than `k` entries when fewer are given.
pub fn select_top_k(scored: &[(SourceRef, SourceScore)], k: usize) -> Vec<(SourceRef, SourceScore)> {
    let mut ranked = scored.to_vec();
    ranked.sort_by(|a, b| rank_order(&a.0.uri, &a.1, &b.0.uri, &b.1));
    ranked.truncate(k);
    ranked
}

fn rank_order(uri_a: &str, score_a: &SourceScore, uri_b: &str, score_b: &SourceScore) -> std::cmp::Ordering {
    score_b
        .combined
        .total_cmp(&score_a.combined)
        .then_with(|| score_b.unique_contribution.cmp(&score_a.unique_contribution))
        .then_with(|| uri_a.cmp(uri_b))
}

/// Filters candidate links through the visited set, updating it.
/// Iteration order decides which parent is recorded when several
/// sources link the same new URI: the first one wins.
pub fn discover_next<'a>(
    links: impl IntoIterator<Item = &'a SourceRef>,
    visited: &mut BTreeSet<String>,
) -> Vec<SourceRef> {
    let mut next = Vec::new();
    for link in links {
        if visited.insert(link.uri.clone()) {
            next.push(link.clone());
        }
    }
    next
}

/// Everything the engine learned about one source within a layer.
#[derive(Debug, Clone)]
pub struct SourceEvaluation {
    pub source: SourceRef,
    pub status: FetchStatus,
    pub raw_token_count: usize,
    /// Present only when fetch and filter both succeeded.
    pub filtered: Option<FilteredContent>,
    /// Links surviving in the filtered content, stamped as children.
    pub links: Vec<SourceRef>,
    pub score: SourceScore,
    pub verbatim_fraction: Option<f64>,
    pub error: Option<String>,
}

/// Outcome of evaluating one layer against the frozen container.
#[derive(Debug, Clone)]
pub struct LayerStep {
    /// One evaluation per input source, in input order.
    pub evaluations: Vec<SourceEvaluation>,
    pub decision: LayerDecision,
}

#[derive(Debug, Clone)]
pub enum LayerDecision {
    /// A guard fired; nothing from this layer is merged.
    Terminate(TerminationReason),
    /// Indices into `evaluations` in rank order, plus the fused container.
    Advance { selected: Vec<usize>, merged: KnowledgeContainer },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("cannot load stopword list: {0}")]
    Stopwords(#[from] crate::tokenize::StopwordFileError),
    #[error("no seed sources provided")]
    NoSeeds,
    #[error(transparent)]
    PolicyMismatch(#[from] PolicyMismatch),
    #[error("fusion violated its contract: {0}")]
    FusionContract(String),
}

pub struct Engine<'a> {
    config: EngineConfig,
    policy: TokenPolicy,
    provider: &'a dyn ContentProvider,
    filter: &'a dyn FilterInterface,
    fusion: &'a dyn FusionInterface,
}

impl<'a> Engine<'a> {
    /// Builds an engine, resolving the tokenization policy from the
    /// configuration's stopword choice. The filter must tokenize under
    /// the same policy; a mismatch surfaces as a scoring error.
    pub fn new(
        config: EngineConfig,
        provider: &'a dyn ContentProvider,
        filter: &'a dyn FilterInterface,
        fusion: &'a dyn FusionInterface,
    ) -> Result<Self, EngineError> {
        let policy = TokenPolicy::scoring_with(&config.stopword_policy)?;
        Self::with_policy(config, policy, provider, filter, fusion)
    }

    /// Like [`Engine::new`] but with an explicit policy.
    pub fn with_policy(
        config: EngineConfig,
        policy: TokenPolicy,
        provider: &'a dyn ContentProvider,
        filter: &'a dyn FilterInterface,
        fusion: &'a dyn FusionInterface,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        Ok(Self { config, policy, provider, filter, fusion })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn policy(&self) -> &TokenPolicy {
        &self.policy
    }

    /// Runs the full exploration from `seeds` and returns the final
    /// container plus the complete trace. Termination is guaranteed:
    /// threshold guard, exhaustion, or the layer cap.
    pub fn run(&self, query: &Query, seeds: &[SourceRef]) -> Result<(KnowledgeContainer, RunTrace), EngineError> {
        if seeds.is_empty() {
            return Err(EngineError::NoSeeds);
        }
        // Seeds are layer 0 by definition; restamp and deduplicate.
        let mut visited = BTreeSet::new();
        let mut sources: Vec<SourceRef> = Vec::new();
        for seed in seeds {
            if visited.insert(seed.uri.clone()) {
                sources.push(SourceRef::seed(&seed.uri));
            }
        }

        let mut container = KnowledgeContainer::empty(self.policy.fingerprint());
        let mut layers: Vec<LayerRecord> = Vec::new();

        loop {
            let layer_index = layers.len() as u32;
            let step = self.layer_step(query, &sources, &container)?;
            let max_combined =
                step.evaluations.iter().map(|e| e.score.combined).fold(0.0_f64, f64::max);

            match step.decision {
                LayerDecision::Terminate(reason) => {
                    log::info!(
                        "layer {layer_index}: {} sources, max score {max_combined:.4}, terminating ({reason})",
                        step.evaluations.len(),
                    );
                    layers.push(layer_record(
                        layer_index,
                        &step.evaluations,
                        Vec::new(),
                        container.size,
                        container.size,
                        Some(reason),
                    ));
                    break;
                }
                LayerDecision::Advance { selected, merged } => {
                    let selected_uris: Vec<String> =
                        selected.iter().map(|&i| step.evaluations[i].source.uri.clone()).collect();
                    let next = discover_next(
                        selected.iter().flat_map(|&i| step.evaluations[i].links.iter()),
                        &mut visited,
                    );
                    let size_before = container.size;
                    log::info!(
                        "layer {layer_index}: {} sources, max score {max_combined:.4}, selected {}, container {} -> {} tokens",
                        step.evaluations.len(),
                        selected_uris.join(", "),
                        size_before,
                        merged.size,
                    );
                    layers.push(layer_record(
                        layer_index,
                        &step.evaluations,
                        selected_uris,
                        size_before,
                        merged.size,
                        None,
                    ));
                    container = merged;

                    if layers.len() >= self.config.max_layers {
                        // The cap binds before any synthetic next-layer
                        // record, so the trace never exceeds max_layers
                        // records. With nothing discovered the run is
                        // exhausted, not truncated.
                        let last = layers.last_mut().expect("at least one layer recorded");
                        last.termination = Some(if next.is_empty() {
                            TerminationReason::Exhausted
                        } else {
                            TerminationReason::MaxLayers
                        });
                        break;
                    }
                    if next.is_empty() {
                        // Mirror of the empty-set entry guard: the next
                        // layer is entered with nothing and terminates.
                        layers.push(LayerRecord {
                            layer: layer_index + 1,
                            sources: Vec::new(),
                            selected: Vec::new(),
                            container_size_before: container.size,
                            container_size_after: container.size,
                            termination: Some(TerminationReason::Exhausted),
                        });
                        break;
                    }
                    sources = next;
                }
            }
        }

        let trace = RunTrace { query: query.clone(), config: self.config.clone(), layers };
        Ok((container, trace))
    }

    /// Evaluates one layer against a frozen container and decides how
    /// the run proceeds. Scores are computed for every source before
    /// any guard is consulted, so evaluation order cannot change the
    /// outcome.
    pub fn layer_step(
        &self,
        query: &Query,
        sources: &[SourceRef],
        container: &KnowledgeContainer,
    ) -> Result<LayerStep, EngineError> {
        if sources.is_empty() {
            return Ok(LayerStep {
                evaluations: Vec::new(),
                decision: LayerDecision::Terminate(TerminationReason::Exhausted),
            });
        }

        let evaluations = self.evaluate_layer(query, sources, container)?;

        let usable = evaluations.iter().filter(|e| e.filtered.is_some()).count();
        if usable == 0 {
            return Ok(LayerStep {
                evaluations,
                decision: LayerDecision::Terminate(TerminationReason::Exhausted),
            });
        }

        let max_combined = evaluations.iter().map(|e| e.score.combined).fold(0.0_f64, f64::max);
        if max_combined < self.config.threshold {
            return Ok(LayerStep {
                evaluations,
                decision: LayerDecision::Terminate(TerminationReason::Threshold),
            });
        }

        let mut eligible: Vec<usize> =
            (0..evaluations.len()).filter(|&i| evaluations[i].filtered.is_some()).collect();
        eligible.sort_by(|&a, &b| {
            rank_order(
                &evaluations[a].source.uri,
                &evaluations[a].score,
                &evaluations[b].source.uri,
                &evaluations[b].score,
            )
        });
        eligible.truncate(self.config.top_k);

        let selected_content: Vec<&FilteredContent> =
            eligible.iter().map(|&i| evaluations[i].filtered.as_ref().expect("eligible")).collect();
        let merged = self.fusion.merge(container, &selected_content);
        if merged.policy_fingerprint != container.policy_fingerprint {
            return Err(EngineError::FusionContract("policy fingerprint changed".into()));
        }
        if !merged.is_consistent() {
            return Err(EngineError::FusionContract("size does not match token count".into()));
        }
        if !merged.tokens.is_superset(&container.tokens) {
            return Err(EngineError::FusionContract("container tokens were dropped".into()));
        }

        Ok(LayerStep { evaluations, decision: LayerDecision::Advance { selected: eligible, merged } })
    }

    /// Fetch/filter/score every source, fanning out over worker
    /// threads bounded by `max_in_flight`. Results keep input order.
    fn evaluate_layer(
        &self,
        query: &Query,
        sources: &[SourceRef],
        container: &KnowledgeContainer,
    ) -> Result<Vec<SourceEvaluation>, EngineError> {
        let workers = self.config.max_in_flight.min(sources.len()).max(1);
        if workers == 1 {
            return sources.iter().map(|s| self.evaluate_source(query, s, container)).collect();
        }

        let cursor = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<Result<SourceEvaluation, EngineError>>>> =
            sources.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::Relaxed);
                    let Some(source) = sources.get(i) else {
                        break;
                    };
                    let result = self.evaluate_source(query, source, container);
                    *slots[i].lock().expect("evaluation slot poisoned") = Some(result);
                });
            }
        });
        slots
            .into_iter()
            .map(|slot| slot.into_inner().expect("slot poisoned").expect("every slot filled"))
            .collect()
    }

    fn evaluate_source(
        &self,
        query: &Query,
        source: &SourceRef,
        container: &KnowledgeContainer,
    ) -> Result<SourceEvaluation, EngineError> {
        let raw = match self.provider.resolve(source) {
            Ok(raw) => raw,
            Err(e) => {
                return self.failed_evaluation(source, FetchStatus::NetworkError, 0, Some(e.to_string()), container);
            }
        };
        if raw.status != FetchStatus::Ok {
            return self.failed_evaluation(source, raw.status, 0, None, container);
        }

        let raw_token_count = token_set(&raw.text, &self.policy).len();
        let filtered = match self.filter.filter(query, &raw) {
            Ok(filtered) => filtered,
            Err(e) => {
                return self.failed_evaluation(
                    source,
                    FetchStatus::Ok,
                    raw_token_count,
                    Some(e.to_string()),
                    container,
                );
            }
        };

        let score = score_source(&filtered, container)?;
        let links = filtered_links(&raw, &filtered);
        let verbatim = match self.config.filter_mode {
            FilterMode::Llm => verbatim_fraction(&raw, &filtered),
            FilterMode::Extractive => None,
        };
        Ok(SourceEvaluation {
            source: source.clone(),
            status: FetchStatus::Ok,
            raw_token_count,
            filtered: Some(filtered),
            links,
            score,
            verbatim_fraction: verbatim,
            error: None,
        })
    }

    /// A source that contributes nothing: scored as empty content so
    /// increase/density follow the same rules as everything else.
    fn failed_evaluation(
        &self,
        source: &SourceRef,
        status: FetchStatus,
        raw_token_count: usize,
        error: Option<String>,
        container: &KnowledgeContainer,
    ) -> Result<SourceEvaluation, EngineError> {
        let empty = FilteredContent::empty(source.clone(), &self.policy);
        let score = score_source(&empty, container)?;
        Ok(SourceEvaluation {
            source: source.clone(),
            status,
            raw_token_count,
            filtered: None,
            links: Vec::new(),
            score,
            verbatim_fraction: None,
            error,
        })
    }
}

fn layer_record(
    layer: u32,
    evaluations: &[SourceEvaluation],
    selected: Vec<String>,
    size_before: usize,
    size_after: usize,
    termination: Option<TerminationReason>,
) -> LayerRecord {
    LayerRecord {
        layer,
        sources: evaluations
            .iter()
            .map(|e| SourceOutcome {
                source: e.source.clone(),
                status: e.status,
                raw_token_count: e.raw_token_count,
                filtered_word_count: e.filtered.as_ref().map(|f| f.word_count).unwrap_or(0),
                score: e.score.clone(),
                verbatim_fraction: e.verbatim_fraction,
                error: e.error.clone(),
            })
            .collect(),
        selected,
        container_size_before: size_before,
        container_size_after: size_after,
        termination,
    }
}
