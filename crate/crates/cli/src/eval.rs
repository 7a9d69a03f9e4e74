//! `wise eval`: the comparison metrics, either over the bundled
//! five-system fixture set (the default) or over user-supplied JSON
//! files in the same schemas.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Subcommand;
use wise_core::eval::{
    bleu, cross_system_matrix, fixtures, level_average, recall, rouge_l, rouge_n,
    validate_annotations, LevelAnnotation, ReferenceSet, RougeScore, SystemAverages, SystemOutput,
};

use crate::files::{read_json, read_text};

#[derive(Subcommand)]
pub enum EvalCommand {
    /// N-gram and longest-common-subsequence overlap of two text files
    Rouge {
        #[arg(long, value_name = "FILE")]
        candidate: PathBuf,
        #[arg(long, value_name = "FILE")]
        reference: PathBuf,
    },
    /// Modified n-gram precision with brevity penalty, orders 1-4
    Bleu {
        #[arg(long, value_name = "FILE")]
        candidate: PathBuf,
        #[arg(long, value_name = "FILE")]
        reference: PathBuf,
    },
    /// Entity recall of each system against a reference set
    Recall {
        /// System output JSON files (default: the bundled comparison set)
        #[arg(long, value_name = "FILE", num_args = 1..)]
        outputs: Vec<PathBuf>,
        /// Reference set JSON (default: the bundled disease reference)
        #[arg(long, value_name = "FILE")]
        reference: Option<PathBuf>,
    },
    /// Mean level-of-detail over each system's annotations
    Levels {
        /// Annotation JSON files, one system each (default: bundled)
        #[arg(long, value_name = "FILE", num_args = 1..)]
        annotations: Vec<PathBuf>,
    },
    /// Each system as reference, every other as candidate, averaged
    Matrix {
        /// System output JSON files (default: the bundled comparison set)
        #[arg(long, value_name = "FILE", num_args = 1..)]
        outputs: Vec<PathBuf>,
    },
}

pub fn cmd_eval(cmd: EvalCommand) -> Result<ExitCode> {
    match cmd {
        EvalCommand::Rouge { candidate, reference } => cmd_rouge(&candidate, &reference),
        EvalCommand::Bleu { candidate, reference } => cmd_bleu(&candidate, &reference),
        EvalCommand::Recall { outputs, reference } => cmd_recall(&outputs, reference.as_deref()),
        EvalCommand::Levels { annotations } => cmd_levels(&annotations),
        EvalCommand::Matrix { outputs } => cmd_matrix(&outputs),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn load_outputs(paths: &[PathBuf]) -> Result<Vec<SystemOutput>> {
    if paths.is_empty() {
        return Ok(fixtures::system_outputs());
    }
    paths.iter().map(|p| read_json(p, "system output")).collect()
}

fn rouge_row(label: &str, score: Option<RougeScore>) -> String {
    match score {
        Some(s) => {
            format!("{label:<8}  {:>9.4}  {:>9.4}  {:>9.4}", s.precision, s.recall, s.f1)
        }
        None => format!("{label:<8}  {:>9}  {:>9}  {:>9}", "n/a", "n/a", "n/a"),
    }
}

fn cmd_rouge(candidate: &Path, reference: &Path) -> Result<()> {
    let cand = read_text(candidate)?;
    let refr = read_text(reference)?;
    println!("{:<8}  {:>9}  {:>9}  {:>9}", "metric", "precision", "recall", "f1");
    println!("{}", rouge_row("rouge-1", rouge_n(&cand, &refr, 1)));
    println!("{}", rouge_row("rouge-2", rouge_n(&cand, &refr, 2)));
    println!("{}", rouge_row("rouge-l", rouge_l(&cand, &refr)));
    Ok(())
}

fn cmd_bleu(candidate: &Path, reference: &Path) -> Result<()> {
    let cand = read_text(candidate)?;
    let refr = read_text(reference)?;
    println!("bleu: {:.4}", bleu(&cand, &refr));
    Ok(())
}

fn cmd_recall(output_paths: &[PathBuf], reference_path: Option<&Path>) -> Result<()> {
    let outputs = load_outputs(output_paths)?;
    let reference: ReferenceSet = match reference_path {
        Some(path) => read_json(path, "reference set")?,
        None => fixtures::disease_reference(),
    };
    reference.validate().context("reference set is inconsistent")?;
    let canonicals = reference.normalized_canonicals();
    if canonicals.is_empty() {
        bail!("reference set has no canonical entities");
    }

    println!("{:<16}  {:>10}  {:>6}", "system", "identified", "recall");
    for output in &outputs {
        let hits = output
            .entities
            .iter()
            .map(|e| reference.resolve(e))
            .collect::<std::collections::BTreeSet<_>>()
            .intersection(&canonicals)
            .count();
        let value = recall(output, &reference).expect("non-empty reference always yields recall");
        println!(
            "{:<16}  {:>6}/{:<3}  {:>6.3}",
            output.system,
            hits,
            canonicals.len(),
            value
        );
    }
    Ok(())
}

fn cmd_levels(annotation_paths: &[PathBuf]) -> Result<()> {
    let sets: Vec<(String, Vec<LevelAnnotation>)> = if annotation_paths.is_empty() {
        fixtures::level_annotations()
    } else {
        annotation_paths
            .iter()
            .map(|path| {
                let annotations: Vec<LevelAnnotation> = read_json(path, "annotation file")?;
                validate_annotations(&annotations)
                    .with_context(|| format!("annotation file {}", path.display()))?;
                let name = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| path.display().to_string());
                Ok((name, annotations))
            })
            .collect::<Result<_>>()?
    };

    println!("{:<16}  {:>8}  {:>10}", "system", "entities", "mean-level");
    for (system, annotations) in &sets {
        match level_average(annotations) {
            Some(avg) => {
                println!("{:<16}  {:>8}  {:>10.2}", system, annotations.len(), avg)
            }
            None => println!("{:<16}  {:>8}  {:>10}", system, 0, "n/a"),
        }
    }
    Ok(())
}

fn matrix_cell(value: Option<f64>) -> String {
    value.map_or_else(|| format!("{:>8}", "n/a"), |v| format!("{v:>8.4}"))
}

fn cmd_matrix(output_paths: &[PathBuf]) -> Result<()> {
    let outputs = load_outputs(output_paths)?;
    let rows = cross_system_matrix(&outputs)?;

    println!(
        "{:<16}  {:>8}  {:>8}  {:>8}  {:>8}",
        "reference", "rouge-1", "rouge-2", "rouge-l", "bleu"
    );
    for row in &rows {
        println!(
            "{:<16}  {}  {}  {}  {:>8.4}",
            row.system,
            matrix_cell(row.rouge1),
            matrix_cell(row.rouge2),
            matrix_cell(row.rouge_l),
            row.bleu
        );
    }

    let lowest = |metric: &str, pick: fn(&SystemAverages) -> Option<f64>| {
        let best = rows
            .iter()
            .filter_map(|r| pick(r).map(|v| (r.system.as_str(), v)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((system, value)) = best {
            println!("lowest {metric}: {system} ({value:.4})");
        }
    };
    println!();
    lowest("rouge-1", |r| r.rouge1);
    lowest("rouge-2", |r| r.rouge2);
    lowest("rouge-l", |r| r.rouge_l);
    lowest("bleu", |r| Some(r.bleu));
    Ok(())
}
