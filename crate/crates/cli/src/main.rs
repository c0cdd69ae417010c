use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gyrodiff::commands::{self, RunContext};
use gyrodiff::heading::Variant;
use gyrodiff::io::ExperimentConfig;

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  invalid command-line usage
  2  file system error
  3  configuration error
  4  malformed input file (dataset, recording, report)
  5  missing artifact or checkpoint
  6  checksum mismatch (corrupted checkpoint or dataset)
  7  training diverged
  8  shape or sample-rate mismatch
  9  degenerate input (no heading signal, empty window, missing label)";

#[derive(Parser, Debug)]
#[command(name = "gyrodiff", version, about = "Diffusion-denoiser-aided gyrocompassing experiments", after_help = EXIT_CODES)]
struct Cli {
    /// Experiment config (TOML), or a run manifest (`manifest.json`) to re-run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for independent evaluation cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Baseline,
    Enhanced,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic dataset into `<out>/dataset`.
    Generate,
    /// Convert recorded CSV files into a dataset at `<out>/dataset`.
    Ingest {
        /// Directory with recordings and `labels.csv`.
        recordings: PathBuf,
    },
    /// Train the diffusion denoiser on clean synthetic sequences.
    TrainDenoiser,
    /// Train a heading network on a dataset.
    TrainHeading {
        #[arg(long, value_enum, default_value = "enhanced")]
        variant: VariantArg,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Denoiser checkpoint (enhanced variant).
        #[arg(long)]
        denoiser: Option<PathBuf>,
        /// Train the enhanced variant on raw sequences.
        #[arg(long)]
        no_denoiser: bool,
    },
    /// Compare classical, baseline and denoiser-aided heading estimates on the test split.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        denoiser: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long)]
        enhanced: Option<PathBuf>,
    },
    /// Validation CRMSE as a function of the reverse-diffusion stopping step.
    SweepTback {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        denoiser: Option<PathBuf>,
        /// Evaluate this heading checkpoint at every value instead of retraining.
        #[arg(long)]
        reuse: Option<PathBuf>,
        /// Comma-separated values; defaults to the config.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
    /// Train and evaluate under per-sample and per-sequence normalization.
    AblateNorm {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        denoiser: Option<PathBuf>,
    },
    /// Render SVG charts from a saved report.
    Plot {
        /// `report.json` written by evaluate, sweep-tback or ablate-norm.
        report: PathBuf,
    },
}

fn context(cli: &Cli) -> gyrodiff::Result<RunContext> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(RunContext::new(cfg, cli.jobs))
}

fn or_default(p: &Option<PathBuf>, ctx: &RunContext, rel: &str) -> PathBuf {
    p.clone().unwrap_or_else(|| ctx.path(rel))
}

fn run(cli: Cli) -> gyrodiff::Result<Vec<PathBuf>> {
    if let Command::Plot { report } = &cli.command {
        return commands::cmd_plot(report, cli.out.as_deref());
    }
    let ctx = context(&cli)?;
    match &cli.command {
        Command::Generate => commands::cmd_generate(&ctx),
        Command::Ingest { recordings } => commands::cmd_ingest(&ctx, recordings),
        Command::TrainDenoiser => commands::cmd_train_denoiser(&ctx),
        Command::TrainHeading {
            variant,
            dataset,
            denoiser,
            no_denoiser,
        } => {
            let variant = match variant {
                VariantArg::Baseline => Variant::Baseline,
                VariantArg::Enhanced => Variant::Enhanced,
            };
            let denoiser = (variant == Variant::Enhanced && !no_denoiser)
                .then(|| or_default(denoiser, &ctx, commands::DENOISER_CKPT));
            commands::cmd_train_heading(
                &ctx,
                variant,
                &or_default(dataset, &ctx, commands::DATASET_DIR),
                denoiser.as_deref(),
            )
        }
        Command::Evaluate {
            dataset,
            denoiser,
            baseline,
            enhanced,
        } => commands::cmd_evaluate(
            &ctx,
            &or_default(dataset, &ctx, commands::DATASET_DIR),
            &or_default(denoiser, &ctx, commands::DENOISER_CKPT),
            &or_default(baseline, &ctx, commands::BASELINE_CKPT),
            &or_default(enhanced, &ctx, commands::ENHANCED_CKPT),
        ),
        Command::SweepTback {
            dataset,
            denoiser,
            reuse,
            values,
        } => {
            let reuse = reuse.clone().or_else(|| {
                ctx.cfg
                    .pipeline
                    .sweep_reuse_heading
                    .then(|| ctx.path(commands::ENHANCED_CKPT))
            });
            let values = values.clone().unwrap_or_else(|| ctx.cfg.pipeline.sweep_values.clone());
            commands::cmd_sweep_tback(
                &ctx,
                &or_default(dataset, &ctx, commands::DATASET_DIR),
                &or_default(denoiser, &ctx, commands::DENOISER_CKPT),
                reuse.as_deref(),
                &values,
            )
        }
        Command::AblateNorm { dataset, denoiser } => commands::cmd_ablate_norm(
            &ctx,
            &or_default(dataset, &ctx, commands::DATASET_DIR),
            &or_default(denoiser, &ctx, commands::DENOISER_CKPT),
        ),
        Command::Plot { report } => commands::cmd_plot(report, cli.out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", display(&f));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}
