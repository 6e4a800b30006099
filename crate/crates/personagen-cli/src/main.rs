//! Batch command-line front end: composable pipeline stages over files.
//!
//! Every command loads one TOML run configuration, writes its primary
//! artifact to `--out`, and drops a machine-readable `*.summary.json`
//! next to it. Exit codes: 0 success, 1 configuration/usage problems,
//! 2 runtime failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use personagen::pipeline::{
    make_backends, run_embed, run_eval_classify_pair, run_eval_classify_single, run_eval_diversity,
    run_eval_similarity, run_generate, run_ingest_golden, run_judge, run_personas, Backends,
    EmbedInput,
};
use personagen::store::{
    confusion_csv, default_config, load_config, pca_csv, write_json, write_text, BackendKind,
    RunConfig,
};
use personagen::{Error, Result};

#[derive(Parser)]
#[command(
    name = "personagen",
    version,
    about = "Persona-conditioned synthetic emotion-text generation and evaluation",
    propagate_version = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML run configuration; omitted = the embedded default config.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Primary artifact path for this command.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Force the backend for both chat and embeddings.
    /// The remote API key is read from the configured environment
    /// variable; there is deliberately no key flag.
    #[arg(long, global = true, value_name = "mock|remote", value_parser = parse_backend)]
    backend: Option<BackendKind>,
    /// Validate the configuration and print the run plan without touching
    /// any backend or writing artifacts.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample, validate, and write persona records.
    Personas {
        /// How many validated personas to produce.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Generate emotion-labelled texts conditioned on personas and
    /// freshly sampled scenarios.
    Generate {
        /// Persona record file produced by `personas`.
        #[arg(long, value_name = "FILE")]
        personas: PathBuf,
    },
    /// Embed a record file into fixed-dimension vectors.
    Embed {
        /// Input record file.
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// What the input file contains: generated samples or an ingested
        /// golden corpus.
        #[arg(long, default_value = "samples", value_parser = parse_embed_input, value_name = "samples|golden")]
        kind: EmbedInput,
    },
    /// Per-emotion MCD/CE, corpus-level CD, and a 2-D projection table.
    EvalDiversity {
        /// Embedded corpus file.
        #[arg(long, value_name = "FILE")]
        corpus: PathBuf,
    },
    /// FID, PRD-Fβ, KL, and HC between a real and a synthetic corpus.
    EvalSimilarity {
        /// Real (golden) embedded corpus.
        #[arg(long, value_name = "FILE")]
        real: PathBuf,
        /// Synthetic embedded corpus.
        #[arg(long, value_name = "FILE")]
        synthetic: PathBuf,
    },
    /// Train and evaluate the bundled classifier.
    EvalClassify {
        /// Single-corpus mode: split/train/evaluate this embedded corpus.
        #[arg(long, value_name = "FILE", conflicts_with_all = ["golden", "synthetic"], required_unless_present = "golden")]
        corpus: Option<PathBuf>,
        /// Pair mode: golden embedded corpus (train-substitution baseline).
        #[arg(
            long,
            value_name = "FILE",
            requires = "synthetic",
            required_unless_present = "corpus"
        )]
        golden: Option<PathBuf>,
        /// Pair mode: synthetic embedded corpus replacing the golden
        /// training split.
        #[arg(long, value_name = "FILE", requires = "golden")]
        synthetic: Option<PathBuf>,
    },
    /// Attach four-criterion rubric scores to generated samples.
    Judge {
        /// Sample record file produced by `generate`.
        #[arg(long, value_name = "FILE")]
        samples: PathBuf,
    },
    /// Convert a labelled CSV corpus into golden records.
    IngestGolden {
        /// Source CSV file.
        #[arg(long, value_name = "FILE")]
        csv: PathBuf,
    },
}

fn parse_backend(raw: &str) -> std::result::Result<BackendKind, String> {
    raw.parse::<BackendKind>().map_err(|err| err.to_string())
}

fn parse_embed_input(raw: &str) -> std::result::Result<EmbedInput, String> {
    match raw {
        "samples" => Ok(EmbedInput::Samples),
        "golden" => Ok(EmbedInput::Golden),
        other => Err(format!(
            "unknown input kind `{other}` (expected `samples` or `golden`)"
        )),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(u8::try_from(err.exit_code()).unwrap_or(2))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    // Any failure to produce a usable configuration — unreadable path
    // included — is an invocation problem, not a runtime failure.
    let mut config = match &cli.global.config {
        Some(path) => load_config(path).map_err(|err| match err {
            Error::Io { path, source } => {
                Error::Validation(vec![format!("cannot read config {path}: {source}")])
            }
            other => other,
        })?,
        None => default_config(),
    };
    if let Some(seed) = cli.global.seed {
        config.seed = seed;
    }
    if cli.global.dry_run {
        print_plan(&cli, &config);
        return Ok(());
    }
    dispatch(&cli, &config)
}

fn dispatch(cli: &Cli, config: &RunConfig) -> Result<()> {
    match &cli.command {
        Command::Personas { count } => {
            let out = require_out(&cli.global)?;
            let backends = backends_for(config, &cli.global)?;
            let summary = run_personas(config, &backends, *count, &out)?;
            write_json(&summary_path(&out), &summary)?;
            println!(
                "wrote {} personas to {} (natural {}, rare-but-plausible {}, rejected {} candidates)",
                summary.written,
                out.display(),
                summary.natural,
                summary.rare_but_plausible,
                summary.implausible_rejected
            );
        }
        Command::Generate { personas } => {
            let out = require_out(&cli.global)?;
            let backends = backends_for(config, &cli.global)?;
            let summary = run_generate(config, &backends, personas, &out)?;
            println!(
                "wrote {} samples to {} ({} emotions x {}; {} truncated, {} scenes resampled)",
                summary.written,
                out.display(),
                summary.emotions.len(),
                summary.samples_per_emotion,
                summary.truncated,
                summary.scene_rejected
            );
            write_json(&summary_path(&out), &summary)?;
        }
        Command::Embed { input, kind } => {
            let out = require_out(&cli.global)?;
            let backends = backends_for(config, &cli.global)?;
            let summary = run_embed(config, &backends, *kind, input, &out)?;
            println!(
                "embedded {} records (dim {}, provider {}) to {}",
                summary.records,
                summary.dim,
                summary.provider_tag,
                out.display()
            );
            write_json(&summary_path(&out), &summary)?;
        }
        Command::EvalDiversity { corpus } => {
            let out = require_out(&cli.global)?;
            let (report, pca) = run_eval_diversity(config, corpus)?;
            write_json(&out, &report)?;
            let pca_path = out.with_extension("pca.csv");
            write_text(&pca_path, &pca_csv(&pca))?;
            println!("{:<16} {:>8} {:>8}", "emotion", "MCD", "CE");
            for (emotion, diversity) in &report.per_emotion {
                println!(
                    "{:<16} {:>8.4} {:>8.4}",
                    emotion, diversity.mcd, diversity.ce
                );
            }
            println!(
                "CD (centroid distance over {} emotions): {:.4}",
                report.per_emotion.len(),
                report.cd
            );
            println!(
                "report: {} | projection table: {}",
                out.display(),
                pca_path.display()
            );
        }
        Command::EvalSimilarity { real, synthetic } => {
            let out = require_out(&cli.global)?;
            let report = run_eval_similarity(config, real, synthetic)?;
            write_json(&out, &report)?;
            println!(
                "FID {:.6} | PRD-F{} {:.4} | KL {:.6} | HC {:.4} (k_bins {}, epsilon {:e})",
                report.fid,
                report.beta,
                report.prd_f_beta,
                report.kl,
                report.hc,
                report.k_bins,
                report.epsilon
            );
            println!("report: {}", out.display());
        }
        Command::EvalClassify {
            corpus,
            golden,
            synthetic,
        } => {
            let out = require_out(&cli.global)?;
            match (corpus, golden, synthetic) {
                (Some(corpus), None, None) => {
                    let report = run_eval_classify_single(config, corpus)?;
                    write_json(
                        &out,
                        &serde_json::json!({ "mode": "single", "report": report }),
                    )?;
                    let confusion_path = out.with_extension("confusion.csv");
                    write_text(&confusion_path, &confusion_csv(&report))?;
                    print_eval("test split", &report);
                    println!(
                        "report: {} | confusion: {}",
                        out.display(),
                        confusion_path.display()
                    );
                }
                (None, Some(golden), Some(synthetic)) => {
                    let (golden_report, synthetic_report) =
                        run_eval_classify_pair(config, golden, synthetic)?;
                    write_json(
                        &out,
                        &serde_json::json!({
                            "mode": "pair",
                            "golden": golden_report,
                            "synthetic": synthetic_report,
                        }),
                    )?;
                    let golden_csv = out.with_extension("golden.confusion.csv");
                    let synthetic_csv = out.with_extension("synthetic.confusion.csv");
                    write_text(&golden_csv, &confusion_csv(&golden_report))?;
                    write_text(&synthetic_csv, &confusion_csv(&synthetic_report))?;
                    print_eval("train on golden", &golden_report);
                    print_eval("train on synthetic", &synthetic_report);
                    println!(
                        "report: {} | confusion: {}, {}",
                        out.display(),
                        golden_csv.display(),
                        synthetic_csv.display()
                    );
                }
                _ => unreachable!("clap arg requirements enforce the two modes"),
            }
        }
        Command::Judge { samples } => {
            let out = require_out(&cli.global)?;
            let backends = backends_for(config, &cli.global)?;
            let summary = run_judge(config, &backends, samples, &out)?;
            println!(
                "judged {} samples ({} unparsable, failure rate {:.3} <= {:.3})",
                summary.judged, summary.unparsable, summary.failure_rate, summary.threshold
            );
            println!(
                "{:<20} {:>6} {:>5} {:>5} {:>5} {:>5} {:>5}",
                "criterion", "mean", "1", "2", "3", "4", "5"
            );
            for (criterion, mean) in &summary.per_criterion_mean {
                let dist = summary.score_distribution[criterion];
                println!(
                    "{:<20} {:>6.2} {:>5} {:>5} {:>5} {:>5} {:>5}",
                    criterion, mean, dist[0], dist[1], dist[2], dist[3], dist[4]
                );
            }
            write_json(&summary_path(&out), &summary)?;
            println!("scored samples: {}", out.display());
        }
        Command::IngestGolden { csv } => {
            let out = require_out(&cli.global)?;
            let summary = run_ingest_golden(config, csv, &out)?;
            println!(
                "ingested {} rows -> {} records ({} skipped) to {}",
                summary.rows_in,
                summary.records_out,
                summary.skipped,
                out.display()
            );
            for (label, count) in &summary.skipped_labels {
                println!("  skipped label `{label}`: {count} rows");
            }
            write_json(&summary_path(&out), &summary)?;
        }
    }
    Ok(())
}

fn print_eval(name: &str, report: &personagen::classify::EvalReport) {
    println!(
        "{name}: accuracy {:.4}, macro F1 {:.4}, weighted F1 {:.4} over {} labels",
        report.accuracy,
        report.macro_avg.f1,
        report.weighted_avg.f1,
        report.labels.len()
    );
}

fn backends_for(config: &RunConfig, global: &GlobalArgs) -> Result<Backends> {
    make_backends(config, global.backend)
}

fn require_out(global: &GlobalArgs) -> Result<PathBuf> {
    global
        .out
        .clone()
        .ok_or_else(|| Error::Validation(vec!["--out is required for this command".to_string()]))
}

/// `samples.jsonl` -> `samples.summary.json`.
fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn print_plan(cli: &Cli, config: &RunConfig) {
    let chat = cli.global.backend.unwrap_or(config.backend.kind);
    let embed = cli.global.backend.unwrap_or(config.embedding.provider);
    let out = cli
        .global
        .out
        .as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "(not set)".to_string());
    println!("dry run: configuration OK");
    println!("seed: {}", config.seed);
    println!("backends: chat {chat}, embedding {embed}");
    match &cli.command {
        Command::Personas { count } => {
            println!(
                "plan: sample and validate {count} personas (resample cap {})",
                config.generation.resample_cap
            );
        }
        Command::Generate { personas } => {
            println!(
                "plan: generate {} emotions x {} samples = {} texts from personas in {}",
                config.emotion_set.len(),
                config.samples_per_emotion,
                config.emotion_set.len() * config.samples_per_emotion,
                personas.display()
            );
            println!("emotions: {}", config.emotion_set.join(", "));
        }
        Command::Embed { input, kind } => {
            let kind = match kind {
                EmbedInput::Samples => "samples",
                EmbedInput::Golden => "golden",
            };
            println!(
                "plan: embed {kind} records from {} at dim {} (batch {}, parallelism {})",
                input.display(),
                config.embedding.dim,
                config.embedding.batch_size,
                config.embedding.parallelism
            );
        }
        Command::EvalDiversity { corpus } => {
            println!(
                "plan: diversity metrics (k_clusters {}) plus projection table for {}",
                config.metrics.k_clusters,
                corpus.display()
            );
        }
        Command::EvalSimilarity { real, synthetic } => {
            println!(
                "plan: similarity metrics (k_bins {}, beta {}) for {} vs {}",
                config.metrics.k_bins,
                config.metrics.beta,
                real.display(),
                synthetic.display()
            );
        }
        Command::EvalClassify {
            corpus,
            golden,
            synthetic,
        } => match (corpus, golden, synthetic) {
            (Some(corpus), _, _) => println!(
                "plan: split/train/evaluate on {} (train fraction {})",
                corpus.display(),
                config.classify.train_fraction
            ),
            (_, Some(golden), Some(synthetic)) => println!(
                "plan: substitution experiment, golden {} vs synthetic {}",
                golden.display(),
                synthetic.display()
            ),
            _ => unreachable!("clap arg requirements enforce the two modes"),
        },
        Command::Judge { samples } => {
            println!(
                "plan: rubric-judge samples in {} (failure-rate threshold {})",
                samples.display(),
                config.judge.failure_rate_threshold
            );
        }
        Command::IngestGolden { csv } => {
            println!(
                "plan: ingest {} with labels {{{}}}",
                csv.display(),
                config.golden.emotion_set.join(", ")
            );
        }
    }
    println!("out: {out} (not written in a dry run)");
}
