use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldfa_cli::compare::compare_files;
use ldfa_cli::{exit, parse_config, run, CliError, RunOptions};

/// Runs low-rank feedback training experiments from TOML configs.
///
/// Exit status: 0 success, 1 runtime or I/O failure, 2 config error,
/// 3 divergence, 4 comparison outside tolerance.
#[derive(Parser)]
#[command(name = "ldfa", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV/JSON artifacts plus a manifest.
    Run {
        config: PathBuf,
        /// Output directory (default: the config's out_dir, then
        /// $LDFA_OUT_ROOT/<name>, then runs/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Added to every seed.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        /// Parallel runs; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check a config and print it with defaults filled in.
    Validate { config: PathBuf },
    /// Compare the overlap columns of a simulation and a theory CSV.
    Compare {
        sim: PathBuf,
        theory: PathBuf,
        #[arg(long)]
        tol: f64,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed_offset,
            jobs,
        } => {
            let cfg = parse_config(&config)?;
            let manifest = run(&cfg, &RunOptions { out, seed_offset, jobs })?;
            println!("{} outputs, config hash {}", manifest.outputs.len(), manifest.config_hash);
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = parse_config(&config)?;
            println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
            println!("config hash {}", cfg.experiment.hash());
            Ok(())
        }
        Command::Compare { sim, theory, tol } => {
            let cmp = compare_files(&sim, &theory, tol)?;
            println!(
                "max overlap deviation {} over {} rows (tolerance {tol})",
                cmp.max_deviation, cmp.rows_compared
            );
            if cmp.within_tolerance {
                Ok(())
            } else {
                Err(CliError::Comparison {
                    deviation: cmp.max_deviation,
                    tolerance: tol,
                })
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
