//! `dofdm`: SINR and achievable-rate analysis of CP/ZP-OFDM over long FIR
//! channels, Monte Carlo cross-checks, TEQ design and rate sweeps.

mod commands;
mod config;
mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::{emit, Format};

#[derive(Parser, Debug)]
#[command(name = "dofdm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Verb,
}

#[derive(Subcommand, Debug)]
enum Verb {
    /// Per-tone signal, interference and noise powers, SINR and rate.
    Analyze(Common),
    /// Monte Carlo SINR next to the analytic values.
    Simulate(Common),
    /// Rate versus TEQ length or CP length, conventional and actual modes.
    Sweep(Common),
    /// Design one MSSNR TEQ.
    TeqDesign(Common),
    /// Write a synthetic CIR file.
    GenChannel(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON run configuration; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CIR file (overrides "cir" in the config).
    #[arg(long)]
    cir: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Seed for `simulate` and `gen-channel` (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
}

fn run(cli: Cli) -> Result<()> {
    let (Verb::Analyze(common)
    | Verb::Simulate(common)
    | Verb::Sweep(common)
    | Verb::TeqDesign(common)
    | Verb::GenChannel(common)) = &cli.command;

    if let Some(threads) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let run_cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cir = common.cir.as_deref();

    let text = match &cli.command {
        Verb::Analyze(_) => commands::analyze_cmd(&run_cfg, cir)?.render(common.format),
        Verb::Simulate(_) => {
            commands::simulate_cmd(&run_cfg, cir, common.seed)?.render(common.format)
        }
        Verb::Sweep(_) => commands::sweep_cmd(&run_cfg, cir)?.render(common.format),
        Verb::TeqDesign(_) => commands::teq_design_cmd(&run_cfg, cir)?.render(common.format),
        Verb::GenChannel(_) => commands::gen_channel_cmd(&run_cfg, common.seed)?,
    };
    emit(&text, common.out.as_deref())
}

fn main() -> Result<()> {
    run(Cli::parse())
}
