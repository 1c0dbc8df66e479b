use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spp_teleport_cli::{run, CliError, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "spp-teleport", version, about = "Plasmonic teleportation simulator and count analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for shot and Monte Carlo loops
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate teleportation and tomography
    Simulate,
    /// Analyze coincidence-count tables
    Analyze,
    /// Hole-array resonance sweep
    Design,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    let mode = match cli.command {
        Command::Simulate => Mode::Simulate,
        Command::Analyze => Mode::Analyze,
        Command::Design => Mode::Design,
    };
    run(mode, &config)
}
