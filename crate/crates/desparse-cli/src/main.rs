//! Experiment runner for the desparsified multi-task Lasso toolbox:
//! configuration-driven simulate → infer → score pipelines and Monte Carlo
//! campaigns.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use desparse_cli::config::{ExperimentConfig, Method};
use desparse_cli::runner;

#[derive(Parser)]
#[command(name = "desparse")]
#[command(about = "Desparsified multi-task Lasso inference experiments")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,

    /// Override the configuration seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (default: alongside the config file).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Worker threads; 0 uses all cores. Falls back to DESPARSE_THREADS.
    #[arg(long)]
    threads: Option<usize>,

    /// Override the configured method.
    #[arg(long, value_enum)]
    method: Option<Method>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulate → infer cycle and emit the per-feature table.
    Infer(CommonArgs),
    /// Repeat simulate → infer with derived seeds and aggregate metrics.
    Campaign(CommonArgs),
}

fn resolve(args: &CommonArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading config {}", args.config.display()))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(method) = args.method {
        cfg.method = method;
    }
    let out_dir = args
        .out_dir
        .clone()
        .unwrap_or_else(|| args.config.parent().unwrap_or(&PathBuf::from(".")).join("out"));

    let threads = args
        .threads
        .or_else(|| std::env::var("DESPARSE_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok((cfg, out_dir))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Infer(args) => {
            let (cfg, out_dir) = resolve(&args)?;
            runner::run_infer(&cfg, &out_dir)
        }
        Command::Campaign(args) => {
            let (cfg, out_dir) = resolve(&args)?;
            runner::run_campaign(&cfg, &out_dir)
        }
    }
}
