use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use holonomy_lab::{run_experiment, Command, ExperimentConfig, LabError};

/// Run a holonomy experiment from a TOML config.
///
/// Exit status: 0 when every gate passes, 1 on a gate failure, 2 on a config or runtime error.
#[derive(Debug, Parser)]
#[command(name = "holonomy-lab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: &Cli) -> Result<bool, LabError> {
    let text = std::fs::read_to_string(&cli.config).map_err(|source| LabError::Io { path: cli.config.clone(), source })?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let manifest = run_experiment(&cfg, cli.command, &cli.out)?;
    print!("{}", holonomy_lab::emit_report(&manifest));
    Ok(manifest.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
