//! `wise sim`: deterministic synthetic corpora. `generate` expands a
//! spec into a corpus manifest, `run` drives the engine over a corpus
//! (generated or loaded) and measures it in one step, `measure` scores
//! an existing trace/container pair against its corpus.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use wise_core::filter::ExtractiveFilter;
use wise_core::sim::{
    demo_engine_config, generate, measure, CorpusManifest, CorpusSpec, ManifestProvider,
    PlantedFact,
};
use wise_core::tokenize::TokenPolicy;
use wise_core::{KnowledgeContainer, RunTrace, SetUnionFusion};

use crate::files::{read_json, write_json, write_text};

#[derive(Subcommand)]
pub enum SimCommand {
    /// Expand a corpus spec into a corpus manifest JSON
    Generate(GenerateArgs),
    /// Generate or load a corpus, run the engine over it, and measure
    Run(SimRunArgs),
    /// Score an existing run against the corpus that produced it
    Measure {
        #[arg(long, value_name = "FILE")]
        trace: PathBuf,
        #[arg(long, value_name = "FILE")]
        container: PathBuf,
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
    },
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Corpus depth in levels (seeds are level 1)
    #[arg(long, value_name = "N")]
    depth: Option<u32>,

    /// Outgoing links per non-leaf document
    #[arg(long, value_name = "N")]
    branching: Option<usize>,

    /// Documents per level
    #[arg(long, value_name = "N")]
    docs_per_layer: Option<usize>,

    /// Fraction of each document's sentences that are noise, in [0, 1)
    #[arg(long, value_name = "RATIO")]
    noise: Option<f64>,

    /// Base repetition rate; repetition rises with depth
    #[arg(long, value_name = "RATIO")]
    overlap: Option<f64>,

    /// Generator seed; same spec and seed, same corpus bytes
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Planted fact as ID@DEPTH, repeatable. Defaults to the
    /// demonstration facts that fit the requested depth.
    #[arg(long = "fact", value_name = "ID@DEPTH")]
    facts: Vec<String>,

    /// Manifest output path
    #[arg(long, value_name = "FILE", default_value = "corpus.json")]
    out: PathBuf,
}

#[derive(Args)]
pub struct SimRunArgs {
    /// Existing corpus manifest; omitted, the demonstration corpus is
    /// generated in memory (and written next to the other outputs)
    #[arg(long, value_name = "FILE")]
    corpus: Option<PathBuf>,

    /// Termination threshold on a layer's best combined score
    #[arg(long, value_name = "SCORE")]
    threshold: Option<f64>,

    /// Sources merged per layer
    #[arg(long, value_name = "K")]
    top_k: Option<usize>,

    /// Hard cap on exploration depth
    #[arg(long, value_name = "N")]
    max_layers: Option<usize>,

    /// Output directory
    #[arg(long, value_name = "DIR", default_value = "sim-out")]
    out: PathBuf,
}

pub fn cmd_sim(cmd: SimCommand) -> Result<ExitCode> {
    match cmd {
        SimCommand::Generate(args) => cmd_generate(args),
        SimCommand::Run(args) => cmd_run(args),
        SimCommand::Measure { trace, container, corpus } => cmd_measure(&trace, &container, &corpus),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn parse_fact(spec: &str) -> Result<PlantedFact> {
    let Some((id, depth)) = spec.rsplit_once('@') else {
        bail!("fact {spec:?} is not of the form ID@DEPTH");
    };
    let depth: u32 =
        depth.parse().with_context(|| format!("fact {spec:?} has a non-numeric depth"))?;
    if id.is_empty() {
        bail!("fact {spec:?} has an empty id");
    }
    Ok(PlantedFact::with_markers(id, depth))
}

fn build_spec(args: &GenerateArgs) -> Result<CorpusSpec> {
    let mut spec = CorpusSpec::demo();
    if let Some(depth) = args.depth {
        spec.depth = depth;
    }
    if let Some(branching) = args.branching {
        spec.branching = branching;
    }
    if let Some(docs) = args.docs_per_layer {
        spec.docs_per_layer = docs;
    }
    if let Some(noise) = args.noise {
        spec.noise_ratio = noise;
    }
    if let Some(overlap) = args.overlap {
        spec.overlap_ratio = overlap;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if args.facts.is_empty() {
        // The demonstration facts, minus any planted deeper than the
        // requested corpus goes.
        spec.facts.retain(|f| f.depth <= spec.depth);
    } else {
        spec.facts = args.facts.iter().map(|f| parse_fact(f)).collect::<Result<_>>()?;
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let spec = build_spec(&args)?;
    let manifest = generate(&spec)?;
    write_json(&args.out, &manifest)?;
    println!(
        "corpus: {} documents over {} level(s), {} fact(s); wrote {}",
        manifest.documents.len(),
        spec.depth,
        spec.facts.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_run(args: SimRunArgs) -> Result<()> {
    let manifest: CorpusManifest = match &args.corpus {
        Some(path) => read_json(path, "corpus manifest")?,
        None => generate(&CorpusSpec::demo())?,
    };
    let generated_in_memory = args.corpus.is_none();

    let mut config = demo_engine_config();
    if let Some(threshold) = args.threshold {
        config.threshold = threshold;
    }
    if let Some(top_k) = args.top_k {
        config.top_k = top_k;
    }
    if let Some(max_layers) = args.max_layers {
        config.max_layers = max_layers;
    }
    config.validate()?;

    let policy = TokenPolicy::scoring_with(&config.stopword_policy)?;
    let provider = ManifestProvider::new(&manifest);
    let filter = ExtractiveFilter::with_defaults(policy.clone());
    let fusion = SetUnionFusion;
    let engine =
        wise_core::Engine::with_policy(config, policy, &provider, &filter, &fusion)?;
    let query = manifest.query();
    let (container, trace) = engine.run(&query, &manifest.seeds())?;

    let measured = measure(&trace, &container, &manifest)?;

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create output directory {}", args.out.display()))?;
    if generated_in_memory {
        write_json(&args.out.join("corpus.json"), &manifest)?;
    }
    write_json(&args.out.join("container.json"), &container)?;
    write_json(&args.out.join("trace.json"), &trace)?;
    write_json(&args.out.join("measure.json"), &measured)?;
    write_text(
        &args.out.join("report.txt"),
        &crate::run::render_report(&query, engine.config(), &trace, &container),
    )?;

    println!("{}", serde_json::to_string_pretty(&measured)?);
    Ok(())
}

fn cmd_measure(trace: &PathBuf, container: &PathBuf, corpus: &PathBuf) -> Result<()> {
    let trace: RunTrace = read_json(trace, "trace")?;
    let container: KnowledgeContainer = read_json(container, "container")?;
    let manifest: CorpusManifest = read_json(corpus, "corpus manifest")?;
    let measured = measure(&trace, &container, &manifest)?;
    println!("{}", serde_json::to_string_pretty(&measured)?);
    Ok(())
}
