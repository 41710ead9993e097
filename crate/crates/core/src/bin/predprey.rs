use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use predprey::io::{self, CliError, Command};

/// Predator-prey model with fractional response, interference and prey refuge.
#[derive(Debug, Parser)]
#[command(name = "predprey", version)]
struct Cli {
    /// One of: simulate, equilibria, sweep, separatrix, extinction,
    /// refuge-threshold, verify-assumptions
    command: Command,
    /// Scenario file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    out: PathBuf,
}

fn thread_count() -> Option<usize> {
    ["PREDPREY_THREADS", "TOOL_THREADS"]
        .iter()
        .find_map(|k| std::env::var(k).ok())
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

fn run(cli: &Cli) -> Result<io::CommandOutput, CliError> {
    let cfg = io::load_config(&cli.config)?;
    io::run_command(cli.command, &cfg, &cli.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = thread_count() {
        // only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(out) => {
            println!("{}: {}", cli.command, out.summary);
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            match &e {
                CliError::Config(msgs) => {
                    eprintln!("error: invalid config {}", cli.config.display());
                    for m in msgs {
                        eprintln!("  {m}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
