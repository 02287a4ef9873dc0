use std::path::PathBuf;
use std::process::ExitCode;

use cartan_core::cli::{self, CliError, RunOptions};
use clap::{Parser, Subcommand};

/// Extremals of sub-Finsler quasimetrics on the Cartan group.
#[derive(Parser)]
#[command(name = "cartan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write CSV/JSON (and optionally SVG).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Cross-check against direct integration of the Hamiltonian system.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run every *.json config in a directory and write a summary CSV.
    Batch {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.payload());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, oracle, svg, out_dir } => {
            match cli::run(&config, &RunOptions { oracle, svg, out_dir }) {
                Ok((out, arts)) => {
                    println!("{} -> {}", out.metadata.case.name(), arts.csv.display());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
        Command::Batch { dir, out } => match cli::batch(&dir, &out) {
            Ok(rows) => {
                let failed = rows.iter().filter(|r| r.result.is_err()).count();
                println!("{} runs, {failed} failed", rows.len());
                for r in rows.iter().filter(|r| r.result.is_err()) {
                    if let Err((_, msg)) = &r.result {
                        eprintln!("{}: {msg}", r.config);
                    }
                }
                if failed > 0 {
                    ExitCode::from(cli::EXIT_IO as u8)
                } else {
                    ExitCode::SUCCESS
                }
            }
            Err(e) => fail(&e),
        },
    }
}
