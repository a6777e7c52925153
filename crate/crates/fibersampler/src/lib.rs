//! File formats, run configuration and command drivers around
//! `fibersampler-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod run;

pub use config::{Command, RunConfig};
pub use error::{ExitKind, RunError, RunResult};

/// Loads the config and dispatches one command.
pub fn execute(
    command: Command,
    config: &std::path::Path,
    seed: Option<u64>,
    out: Option<&std::path::Path>,
) -> RunResult<run::RunSummary> {
    let cfg = RunConfig::load(command, config, seed, out)?;
    match command {
        Command::Train => run::run_train(&cfg),
        Command::Sample => run::run_sample(&cfg),
        Command::Test => run::run_test(&cfg),
        Command::Enumerate => run::run_enumerate(&cfg),
        Command::Lift => run::run_lift(&cfg),
    }
}
