use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybrid_ttsa::experiment::{cmd_chain, cmd_diagnose, cmd_simulate, print_defaults, CliError, ExperimentConfig, Outcome};

#[derive(Parser)]
#[command(name = "ttsa", version, about = "Two-timescale hybrid stochastic approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured simulations and write trajectory CSVs.
    Simulate(Common),
    /// Recompute diagnostics from trajectory CSVs in the output directory.
    Diagnose(Common),
    /// Search for a chain between the configured endpoints.
    Chain(Common),
    /// Print the full default configuration as TOML.
    PrintDefaults,
}

#[derive(Args)]
struct Common {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds overriding `run.seeds`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    quiet: bool,
}

fn load(c: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = &c.seeds {
        cfg.run.seeds = s.clone();
    }
    cfg.validate()?;
    let out = c.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    type Cmd = fn(&ExperimentConfig, &std::path::Path) -> Result<Outcome, CliError>;
    let (common, cmd): (&Common, Cmd) = match &cli.command {
        Command::PrintDefaults => {
            print!("{}", print_defaults());
            return ExitCode::SUCCESS;
        }
        Command::Simulate(c) => (c, cmd_simulate),
        Command::Diagnose(c) => (c, cmd_diagnose),
        Command::Chain(c) => (c, cmd_chain),
    };
    let result = load(common).and_then(|(cfg, out)| cmd(&cfg, &out));
    match result {
        Ok(o) => {
            if !common.quiet {
                print!("{}", o.summary);
            }
            ExitCode::from(o.status.code() as u8)
        }
        Err(e) => {
            eprintln!("ttsa: {e}");
            ExitCode::from(e.exit_status().code() as u8)
        }
    }
}
