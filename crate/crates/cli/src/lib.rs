//! Experiment driver: strict configs, nine experiments, reproducible artifacts.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

pub use config::{Experiment, RunConfig};
pub use error::{CliError, CliResult};
pub use experiments::{Estimate, Resolved};
pub use output::{write_artifacts, ExperimentOutput, ResultRow};

/// Parameters filled in from defaults, plus the resource check.
pub fn validate_config(config: &RunConfig) -> CliResult<(Resolved, Estimate)> {
    let resolved = Resolved::from_config(config)?;
    resolved.check_resources()?;
    let est = resolved.estimate();
    Ok((resolved, est))
}

/// Runs an experiment in memory on a pool of `threads` workers (`0` lets rayon decide).
pub fn run_experiment(config: &RunConfig, threads: usize) -> CliResult<(RunConfig, ExperimentOutput)> {
    let (resolved, _) = validate_config(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::ConfigInvalid(format!("thread pool: {e}")))?;
    let out = pool.install(|| resolved.run(config.seed))?;
    let mut full = config.clone();
    full.params = resolved.params_json();
    Ok((full, out))
}

/// Runs and writes the artifacts, returning the written paths.
pub fn run_config(config: &RunConfig, threads: usize) -> CliResult<Vec<PathBuf>> {
    let (full, out) = run_experiment(config, threads)?;
    write_artifacts(&full, &out)
}
