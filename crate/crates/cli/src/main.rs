//! `interbank` command-line driver.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use interbank::abm::PriceMode;
use interbank::debtrank::DistressTrigger;

use config::{Overrides, ScenarioConfig};
use output::OutputTree;

#[derive(Parser)]
#[command(name = "interbank", version, about = "Multilayer interbank network diagnostics and contagion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Network bundle manifest; replaces the scenario's network source.
    #[arg(long, global = true)]
    bundle: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed of the synthetic generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated liquidity buffer scalers.
    #[arg(long, global = true, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    /// Minimum capital ratio.
    #[arg(long, global = true)]
    gamma_bar: Option<f64>,
    /// `static` or `dynamic`.
    #[arg(long, global = true)]
    price_mode: Option<PriceMode>,
    /// `any-distress` or `full-default`.
    #[arg(long, global = true)]
    debtrank_mode: Option<DistressTrigger>,
    /// Use the verbatim interbank asset bases in the cascade model.
    #[arg(long, global = true)]
    strict_paper_formulas: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Load the network and write a summary.
    Validate,
    /// Write a synthetic network as a CSV bundle.
    Generate,
    /// Degree profiles, centralities and their densities per layer.
    Topology,
    /// DebtRank sweeps in the credit and liquidity calibrations.
    Debtrank,
    /// Aggregated versus summed DebtRank on a pair of layers.
    Superpose,
    /// Agent-based cascade sweep over all seeds and betas.
    Abm,
    /// Every analysis listed in the scenario.
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Generate => "generate",
            Command::Topology => "topology",
            Command::Debtrank => "debtrank",
            Command::Superpose => "superpose",
            Command::Abm => "abm",
            Command::Report => "report",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        anyhow::ensure!(k > 0, "--threads must be at least 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = ScenarioConfig::load(
        cli.config.as_deref(),
        Overrides {
            bundle: cli.bundle,
            out: cli.out,
            seed: cli.seed,
            betas: cli.beta,
            gamma_bar: cli.gamma_bar,
            price_mode: cli.price_mode,
            debtrank_mode: cli.debtrank_mode,
            strict_paper_formulas: cli.strict_paper_formulas,
        },
    )?;
    let mut out = OutputTree::create(&cfg.output_dir, cli.command.name())?;
    match cli.command {
        Command::Validate => commands::validate(&cfg, &mut out)?,
        Command::Generate => commands::generate(&cfg, &mut out)?,
        Command::Report => commands::report(&cfg, &mut out)?,
        c => {
            let net = commands::load(&cfg)?;
            match c {
                Command::Topology => commands::topology(&cfg, &net, &mut out)?,
                Command::Debtrank => commands::debtrank(&cfg, &net, &mut out)?,
                Command::Superpose => commands::superpose(&cfg, &net, &mut out)?,
                Command::Abm => commands::abm(&cfg, &net, &mut out)?,
                _ => unreachable!(),
            }
        }
    }
    let dir = cfg.output_dir.display().to_string();
    let files = out.finish()?;
    println!("wrote {} files to {dir}", files.len() + 1);
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
