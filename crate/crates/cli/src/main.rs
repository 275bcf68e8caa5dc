use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixedorder_cli::{run_config, validate_config, CliResult, Experiment, RunConfig};

#[derive(Parser)]
#[command(name = "mixedorder", version, about = "Numerical lab for strong-to-weak symmetry breaking in mixed states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON or TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; falls back to MIXEDORDER_THREADS, then all cores.
        #[arg(long, env = "MIXEDORDER_THREADS", default_value_t = 0)]
        threads: usize,
    },
    /// Check a config and print the resolved parameters and a cost estimate.
    Validate { config: PathBuf },
    /// List the experiments.
    ListExperiments,
}

fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, seed, out, threads } => {
            let mut c = RunConfig::load(&config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(o) = out {
                c.output_dir = o;
            }
            for path in run_config(&c, threads)? {
                println!("{}", path.display());
            }
        }
        Command::Validate { config } => {
            let c = RunConfig::load(&config)?;
            let (resolved, est) = validate_config(&c)?;
            let report = serde_json::json!({
                "experiment": c.experiment.name(),
                "seed": c.seed,
                "output_dir": c.output_dir,
                "params": resolved.params_json(),
                "estimate": est,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap_or_default());
        }
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<20} {}", e.name(), e.summary());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
