//! `wise run`: resolve configuration (flags over config file over
//! defaults), wire a content provider and filter, run the engine, and
//! write four artifacts into the output directory — `container.json`,
//! `trace.json`, a human-readable `report.txt`, and `run_manifest.json`
//! (the one file carrying wall-clock timestamps; the other three are
//! byte-deterministic for identical offline runs).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use wise_core::fetch::{seed_sources, CachedProvider, FetchPolicy, WebProvider};
use wise_core::filter::{ExtractiveFilter, LlmFilter, LlmFilterConfig};
use wise_core::sim::{CorpusManifest, ManifestProvider};
use wise_core::tokenize::TokenPolicy;
use wise_core::types::{FetchStatus, StopwordChoice};
use wise_core::{
    Engine, EngineConfig, FilterInterface, FilterMode, KnowledgeContainer, Query, RunTrace,
    SetUnionFusion, SourceRef, TerminationReason,
};

use crate::files::{read_json, unix_now, write_json, write_text};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FilterArg {
    /// Deterministic query-overlap sentence selection, no network
    Extractive,
    /// Chat-completion model filtering (API key via WISE_LLM_API_KEY)
    Llm,
}

impl From<FilterArg> for FilterMode {
    fn from(value: FilterArg) -> Self {
        match value {
            FilterArg::Extractive => FilterMode::Extractive,
            FilterArg::Llm => FilterMode::Llm,
        }
    }
}

#[derive(Args)]
pub struct RunArgs {
    /// Query driving filtering and scoring
    #[arg(long, value_name = "TEXT")]
    pub query: Option<String>,

    /// Seed file: one URI per line, `#` comments and blanks ignored
    #[arg(long, value_name = "FILE")]
    pub seeds: Option<PathBuf>,

    /// Offline corpus manifest (as written by `wise sim generate`)
    #[arg(long, value_name = "FILE", conflicts_with = "seeds")]
    pub corpus: Option<PathBuf>,

    /// Engine configuration JSON; flags override it, it overrides defaults
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Filter implementation
    #[arg(long, value_enum, value_name = "MODE")]
    pub filter: Option<FilterArg>,

    /// Chat-completion endpoint, required with --filter llm
    #[arg(long, value_name = "URL")]
    pub llm_endpoint: Option<String>,

    /// Model name, required with --filter llm
    #[arg(long, value_name = "NAME")]
    pub model: Option<String>,

    /// Termination threshold on a layer's best combined score
    #[arg(long, value_name = "SCORE")]
    pub threshold: Option<f64>,

    /// Sources merged per layer
    #[arg(long, value_name = "K")]
    pub top_k: Option<usize>,

    /// Hard cap on exploration depth
    #[arg(long, value_name = "N")]
    pub max_layers: Option<usize>,

    /// Stopword policy: "none", "builtin", or a stopword file path
    #[arg(long, value_name = "none|builtin|FILE")]
    pub stopwords: Option<String>,

    /// Directory for the fetch and model-replay caches
    #[arg(long, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,

    /// Output directory for container, trace, report, and manifest
    #[arg(long, value_name = "DIR", default_value = "wise-out")]
    pub out: PathBuf,

    /// Seed for randomized components
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
}

/// Everything needed to reproduce an invocation, written alongside the
/// run outputs. Timestamps live here and only here.
#[derive(Serialize)]
struct RunManifest {
    query: String,
    mode: &'static str,
    input: String,
    config_file: Option<String>,
    config: EngineConfig,
    output_dir: String,
    seed_count: usize,
    termination: Option<TerminationReason>,
    layers_explored: usize,
    container_size: usize,
    warning_count: usize,
    started_at_unix: u64,
    finished_at_unix: u64,
}

enum Mode {
    Corpus(Box<CorpusManifest>, PathBuf),
    Seeds(Vec<SourceRef>, PathBuf),
}

/// Flags > config file > defaults, then validation.
fn resolve_config(args: &RunArgs) -> Result<EngineConfig> {
    let mut config = match &args.config {
        Some(path) => read_json::<EngineConfig>(path, "config file")?,
        None => EngineConfig::default(),
    };
    if let Some(mode) = args.filter {
        config.filter_mode = mode.into();
    }
    if let Some(threshold) = args.threshold {
        config.threshold = threshold;
    }
    if let Some(top_k) = args.top_k {
        config.top_k = top_k;
    }
    if let Some(max_layers) = args.max_layers {
        config.max_layers = max_layers;
    }
    if let Some(stopwords) = &args.stopwords {
        config.stopword_policy = StopwordChoice::parse(stopwords);
    }
    if let Some(dir) = &args.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
    if let Some(seed) = args.seed {
        config.random_seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn build_filter(args: &RunArgs, config: &EngineConfig, policy: &TokenPolicy) -> Result<Box<dyn FilterInterface>> {
    match config.filter_mode {
        FilterMode::Extractive => Ok(Box::new(ExtractiveFilter::with_defaults(policy.clone()))),
        FilterMode::Llm => {
            let endpoint = args
                .llm_endpoint
                .clone()
                .ok_or_else(|| anyhow!("--filter llm requires --llm-endpoint"))?;
            let model =
                args.model.clone().ok_or_else(|| anyhow!("--filter llm requires --model"))?;
            let replay_dir = config.cache_dir.as_ref().map(|dir| dir.join("llm"));
            let filter =
                LlmFilter::new(LlmFilterConfig::new(endpoint, model), policy.clone(), replay_dir)?;
            Ok(Box::new(filter))
        }
    }
}

pub fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let started_at = unix_now();
    let config = resolve_config(&args)?;

    let mode = if let Some(path) = &args.corpus {
        let manifest: CorpusManifest = read_json(path, "corpus manifest")?;
        Mode::Corpus(Box::new(manifest), path.clone())
    } else if let Some(path) = &args.seeds {
        let seeds = seed_sources(path)?;
        Mode::Seeds(seeds, path.clone())
    } else {
        bail!("nothing to run: pass --seeds FILE or --corpus FILE (see `wise run --help`)");
    };

    let query = match (&args.query, &mode) {
        (Some(text), _) => Query::new("cli", text)?,
        (None, Mode::Corpus(manifest, _)) => manifest.query(),
        (None, Mode::Seeds(..)) => bail!("--query is required with --seeds"),
    };

    let policy = TokenPolicy::scoring_with(&config.stopword_policy)?;
    let filter = build_filter(&args, &config, &policy)?;
    let fusion = SetUnionFusion;

    let (container, trace) = match &mode {
        Mode::Corpus(manifest, _) => {
            let provider = ManifestProvider::new(manifest);
            let engine =
                Engine::with_policy(config.clone(), policy.clone(), &provider, filter.as_ref(), &fusion)?;
            engine.run(&query, &manifest.seeds())?
        }
        Mode::Seeds(seeds, _) => {
            let fetch_policy = FetchPolicy {
                politeness_delay: Duration::from_millis(config.politeness_delay_ms),
                ..FetchPolicy::default()
            };
            let web = WebProvider::new(fetch_policy);
            match &config.cache_dir {
                Some(dir) => {
                    let provider = CachedProvider::new(web, dir.join("fetch"))
                        .with_context(|| format!("cannot open fetch cache under {}", dir.display()))?;
                    let engine = Engine::with_policy(
                        config.clone(),
                        policy.clone(),
                        &provider,
                        filter.as_ref(),
                        &fusion,
                    )?;
                    engine.run(&query, seeds)?
                }
                None => {
                    let engine = Engine::with_policy(
                        config.clone(),
                        policy.clone(),
                        &web,
                        filter.as_ref(),
                        &fusion,
                    )?;
                    engine.run(&query, seeds)?
                }
            }
        }
    };

    let warnings = collect_warnings(&trace);
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let seeds_all_failed = trace
        .layers
        .first()
        .is_some_and(|l| !l.sources.is_empty() && l.sources.iter().all(|s| s.status != FetchStatus::Ok));

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    write_json(&args.out.join("container.json"), &container)?;
    write_json(&args.out.join("trace.json"), &trace)?;
    write_text(&args.out.join("report.txt"), &render_report(&query, &config, &trace, &container))?;

    let (mode_name, input) = match &mode {
        Mode::Corpus(_, path) => ("corpus", path.display().to_string()),
        Mode::Seeds(_, path) => ("seeds", path.display().to_string()),
    };
    let manifest = RunManifest {
        query: query.text.clone(),
        mode: mode_name,
        input,
        config_file: args.config.as_ref().map(|p| p.display().to_string()),
        config: config.clone(),
        output_dir: args.out.display().to_string(),
        seed_count: trace.layers.first().map_or(0, |l| l.sources.len()),
        termination: trace.termination(),
        layers_explored: trace.layers.iter().filter(|l| !l.sources.is_empty()).count(),
        container_size: container.size,
        warning_count: warnings.len(),
        started_at_unix: started_at,
        finished_at_unix: unix_now(),
    };
    write_json(&args.out.join("run_manifest.json"), &manifest)?;

    let termination = trace
        .termination()
        .map_or_else(|| "unterminated".to_string(), |t| t.to_string());
    println!(
        "run complete: {} after {} layer(s); container holds {} tokens in {} segment(s)",
        termination,
        trace.layers.len(),
        container.size,
        container.segments.len()
    );
    println!("outputs in {}: container.json trace.json report.txt run_manifest.json", args.out.display());

    if seeds_all_failed {
        eprintln!("error: no seed source could be fetched");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn status_label(status: FetchStatus) -> &'static str {
    match status {
        FetchStatus::Ok => "ok",
        FetchStatus::Blocked => "blocked",
        FetchStatus::Paywalled => "paywalled",
        FetchStatus::NetworkError => "network error",
    }
}

/// One line per source that failed to fetch or failed to filter.
fn collect_warnings(trace: &RunTrace) -> Vec<String> {
    let mut out = Vec::new();
    for layer in &trace.layers {
        for source in &layer.sources {
            let problem = match (&source.status, &source.error) {
                (FetchStatus::Ok, None) => continue,
                (FetchStatus::Ok, Some(error)) => error.clone(),
                (status, Some(error)) => format!("{} ({error})", status_label(*status)),
                (status, None) => status_label(*status).to_string(),
            };
            out.push(format!("layer {}: {}: {}", layer.layer, source.source.uri, problem));
        }
    }
    out
}

pub(crate) fn render_report(
    query: &Query,
    config: &EngineConfig,
    trace: &RunTrace,
    container: &KnowledgeContainer,
) -> String {
    use std::fmt::Write;

    let mut out = String::new();
    let _ = writeln!(out, "query: {}", query.text);
    let _ = writeln!(out, "filter: {}", config.filter_mode);
    let _ = writeln!(out, "stopwords: {}", config.stopword_policy);
    let _ = writeln!(
        out,
        "threshold: {}   top-k: {}   max-layers: {}",
        config.threshold, config.top_k, config.max_layers
    );
    out.push('\n');
    let _ = writeln!(out, "{:>5}  {:>7}  {:>7}  {:>9}  {:>12}  selected", "layer", "sources", "fetched", "max-score", "container");
    for layer in &trace.layers {
        let fetched = layer.sources.iter().filter(|s| s.status == FetchStatus::Ok).count();
        let max_score = layer
            .sources
            .iter()
            .map(|s| s.score.combined)
            .fold(f64::NEG_INFINITY, f64::max);
        let max_score = if layer.sources.is_empty() {
            "-".to_string()
        } else {
            format!("{max_score:.4}")
        };
        let selected = match (&layer.termination, layer.selected.is_empty()) {
            (Some(reason), true) => format!("({reason})"),
            (_, true) => "-".to_string(),
            (_, false) => layer.selected.join(", "),
        };
        let _ = writeln!(
            out,
            "{:>5}  {:>7}  {:>7}  {:>9}  {:>5} -> {:>4}  {}",
            layer.layer,
            layer.sources.len(),
            fetched,
            max_score,
            layer.container_size_before,
            layer.container_size_after,
            selected
        );
    }
    out.push('\n');
    let termination = trace
        .termination()
        .map_or_else(|| "unterminated".to_string(), |t| t.to_string());
    let _ = writeln!(out, "termination: {termination}");
    let _ = writeln!(out, "layers: {}", trace.layers.len());
    let _ = writeln!(
        out,
        "container: {} tokens in {} segments",
        container.size,
        container.segments.len()
    );
    out
}
