//! `mfscope`: NNK-graph manifold geometry from the command line.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 degenerate
//! data, 1 anything else.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mfscope", version, about = "Local manifold geometry from NNK graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic manifold and write it to a point file
    Generate(RunArgs),
    /// Build a KNN or NNK graph and export its edges
    Graph(RunArgs),
    /// Estimate intrinsic dimension from local PCA
    Id(RunArgs),
    /// NNK polytope diameters
    Diameters(RunArgs),
    /// Principal angles between adjacent and random local subspaces
    Angles(RunArgs),
    /// Merge points scale by scale and track the metrics
    Multiscale(RunArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<mfscope::Error>() {
        Some(e) if e.is_invalid_input() => 2,
        Some(e) if e.is_degenerate_data() => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (name, args, cmd): (_, _, fn(&RunConfig) -> anyhow::Result<()>) = match cli.command {
        Command::Generate(a) => ("generate", a, commands::generate_cmd),
        Command::Graph(a) => ("graph", a, commands::graph_cmd),
        Command::Id(a) => ("id", a, commands::id_cmd),
        Command::Diameters(a) => ("diameters", a, commands::diameters_cmd),
        Command::Angles(a) => ("angles", a, commands::angles_cmd),
        Command::Multiscale(a) => ("multiscale", a, commands::multiscale_cmd),
    };
    let cfg = RunConfig::resolve(args)?;
    cmd(&cfg).map_err(|e| e.context(format!("{name} failed")))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
