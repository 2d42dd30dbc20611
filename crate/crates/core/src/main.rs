use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qds_lab::cli::{self, RunConfig};

#[derive(Parser)]
#[command(name = "qds-lab", version, about = "Minimal quantum dynamical semigroups for drift-driven Lindblad generators")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the analyses listed in a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Summarize the artifacts listed in a manifest.
    Report { manifest: PathBuf },
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { config, output_dir } => {
            let mut cfg = match RunConfig::from_file(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(cli::status_of(&e).code() as u8);
                }
            };
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            match cli::run(&cfg) {
                Ok(outcome) => {
                    for v in &outcome.manifest.violations {
                        eprintln!("violation: {v}");
                    }
                    if let Some(e) = &outcome.manifest.error {
                        eprintln!("error: {e}");
                    }
                    println!("manifest: {}", outcome.manifest_path.display());
                    println!("status: {}", outcome.status.code());
                    ExitCode::from(outcome.status.code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(cli::status_of(&e).code() as u8)
                }
            }
        }
        Command::Report { manifest } => match cli::report(&manifest) {
            Ok((text, clean)) => {
                print!("{text}");
                ExitCode::from(if clean { 0 } else { 1 })
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        },
    }
}
