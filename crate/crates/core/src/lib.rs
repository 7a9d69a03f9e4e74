//! Query-driven knowledge extraction over linked document trees.
//!
//! The engine walks sources layer by layer: each layer is fetched,
//! filtered down to query-relevant excerpts, scored by its marginal
//! contribution against the knowledge gathered so far, pruned to the
//! top-k sources, and fused into a growing knowledge container.
//! Exploration stops when the best score in a layer falls below a
//! configured threshold — the point of diminishing returns.
//!
//! Modules follow the pipeline: [`fetch`] acquires content, [`filter`]
//! reduces it, [`score`] ranks it, [`engine`] drives the walk, and
//! [`eval`] / [`sim`] measure the result against references and
//! synthetic corpora.

pub mod engine;
pub mod eval;
pub mod fetch;
pub mod filter;
pub mod score;
pub mod sim;
pub mod tokenize;
pub mod types;

pub use engine::{Engine, FusionInterface, SetUnionFusion};
pub use filter::FilterInterface;
pub use types::{
    EngineConfig, FetchStatus, FilterMode, FilteredContent, KnowledgeContainer, Query, RawContent,
    RunTrace, SourceRef, SourceScore, TerminationReason,
};
