use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fibersampler::{execute, Command};

#[derive(Parser)]
#[command(name = "fibersampler", version, about = "Policy-guided fiber sampling and exact conditional tests")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy on the fiber of the observed data.
    Train(Common),
    /// Draw a chain with a trained policy.
    Sample(Common),
    /// Exact conditional goodness-of-fit test.
    Test(Common),
    /// List every point of a small fiber.
    Enumerate(Common),
    /// Lift subgraph moves to the parent graph.
    Lift(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Train(a) => (Command::Train, a),
        Cmd::Sample(a) => (Command::Sample, a),
        Cmd::Test(a) => (Command::Test, a),
        Cmd::Enumerate(a) => (Command::Enumerate, a),
        Cmd::Lift(a) => (Command::Lift, a),
    };
    match execute(command, &args.config, args.seed, args.out.as_deref()) {
        Ok(summary) => {
            println!("{}", summary.message);
            for p in &summary.outputs {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", summary.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.kind.code() as u8)
        }
    }
}
