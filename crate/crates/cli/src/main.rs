use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlt_cli::commands::{cmd_evaluate, cmd_generate_cs, cmd_select_keywords, cmd_train};
use mlt_cli::report::read_json;
use mlt_cli::synth::{cmd_synth_experiment, SynthConfig, SynthCorpus};
use mlt_cli::{CliResult, ConfigArgs, ExperimentConfig};

/// Train, mine keyword pairs for, code-switch and evaluate cross-lingual dialogue models.
#[derive(Parser)]
#[command(name = "mlt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a DST or NLU model in base, mlt_ontology or mlt_attention mode.
    Train(ConfigArgs),
    /// Mine keyword pairs from a trained model's attention.
    SelectKeywords(ConfigArgs),
    /// Code-switch a data file with a pair file.
    GenerateCs(ConfigArgs),
    /// Evaluate a checkpoint on test data with swapped-in target embeddings.
    Evaluate(ConfigArgs),
    /// BASE vs MLT_A on a built-in synthetic bilingual corpus.
    SynthExperiment(SynthArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file with synthetic experiment settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, alias = "out_dir", default_value = "out")]
    out_dir: PathBuf,
    /// Scale of the per-word target embedding perturbation.
    #[arg(long)]
    noise: Option<f64>,
    /// Number of seeded runs.
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Also write the corpus of the first run here as CLI input files.
    #[arg(long, alias = "export_dir")]
    export_dir: Option<PathBuf>,
}

fn synth_config(a: &SynthArgs) -> CliResult<SynthConfig> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.noise {
        cfg.noise = v;
    }
    if let Some(v) = a.runs {
        cfg.runs = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => {
            let out = cmd_train(&ExperimentConfig::from_args(&a)?)?;
            log::info!("checkpoint written to {}", out.checkpoint.display());
            print_json(&out.metrics)
        }
        Command::SelectKeywords(a) => {
            let sel = cmd_select_keywords(&ExperimentConfig::from_args(&a)?)?;
            for (s, t) in &sel.pairs {
                println!("{s}\t{t}");
            }
            Ok(())
        }
        Command::GenerateCs(a) => {
            let path = cmd_generate_cs(&ExperimentConfig::from_args(&a)?)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Evaluate(a) => print_json(&cmd_evaluate(&ExperimentConfig::from_args(&a)?)?),
        Command::SynthExperiment(a) => {
            let cfg = synth_config(&a)?;
            if let Some(dir) = &a.export_dir {
                SynthCorpus::generate(&cfg, cfg.seed)?.export(dir)?;
            }
            let report = cmd_synth_experiment(&cfg, &a.out_dir)?;
            for r in &report.runs {
                println!(
                    "seed {}: intent {:+.1} points, slot F1 {:+.1} points ({} pairs)",
                    r.seed,
                    r.intent_delta,
                    r.slot_f1_delta,
                    r.pairs.len()
                );
            }
            println!(
                "mean: intent {:+.1} points, slot F1 {:+.1} points",
                report.mean_intent_delta, report.mean_slot_f1_delta
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
