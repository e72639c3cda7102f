use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use fedpaq_cli::commands::{cmd_check, cmd_run, cmd_sweep, cmd_theory, resolve_out_dir};
use fedpaq_cli::config::parse_config;

#[derive(Parser)]
#[command(
    name = "fedpaq",
    about = "Deterministic simulator for federated averaging with partial participation and quantized uploads",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configured run (and its repeats) and write metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default: $FEDPAQ_OUT or ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute the cross product of the config's [sweep] lists.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the convergence-bound constants for a config without running it.
    Theory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the built-in statistical property suites.
    Check {
        #[arg(long, default_value_t = 0xFEDAC5)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    match body() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn body() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg =
                parse_config(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            cmd_run(&cfg, &resolve_out_dir(out), cli.quiet)?;
        }
        Command::Sweep { config, out, seed } => {
            let mut cfg =
                parse_config(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            cmd_sweep(&cfg, &resolve_out_dir(out), cli.quiet)?;
        }
        Command::Theory { config, out, seed } => {
            let mut cfg =
                parse_config(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.run.seed = s;
            }
            cmd_theory(&cfg, out.as_deref(), cli.quiet)?;
        }
        Command::Check { seed } => {
            let failures = cmd_check(seed)?;
            if failures > 0 {
                eprintln!("{failures} suite(s) failed");
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
