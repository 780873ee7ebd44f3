use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hypobridge::commands::{self, Output};
use hypobridge::{status, CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "hypobridge", version, about = "Sample conditioned hypoelliptic Langevin bridges")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` per line); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed, overriding `sampler.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Extra `key=value` assignments applied after the file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Grid eigenvalues next to the roots of the boundary determinant.
    Eigs,
    /// Green's function, mean path and force-free chain against the exact Gaussian.
    LinearCheck,
    /// Run the SPDE sampler.
    Sample,
    /// Importance-sampling (and optionally rejection) reference estimates.
    Oracle,
    /// Sampler against the importance-sampling oracle.
    Compare,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for item in &cli.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{item}`")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.directory = out.display().to_string();
    }
    cfg.check()?;
    Ok(cfg)
}

fn threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HYPOBRIDGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("HYPOBRIDGE_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<i32, CliError> {
    threads()?;
    let cfg = load(cli)?;
    let out = Output::new(cfg.directory.as_ref())?;
    let pass = match cli.command {
        Command::Eigs => {
            commands::eigs(&cfg, &out)?;
            true
        }
        Command::LinearCheck => commands::linear_check(&cfg, &out)?.pass,
        Command::Sample => {
            commands::sample(&cfg, &out)?;
            true
        }
        Command::Oracle => commands::oracle(&cfg, &out)?.pass,
        Command::Compare => commands::compare(&cfg, &out)?.pass,
    };
    Ok(status(pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
