mod args;
mod commands;
mod config;
mod exit;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::args::{
    AnalyzeArgs, CompareArgs, CrosstalkArgs, ForwardArgs, LayerArgs, PropagateArgs, Run4fArgs,
};
use crate::config::{merge, ConfigFile};
use crate::exit::{CliError, CliResult, Status};

/// Simulate a metasurface 4f-correlator array used as the first layer of a CNN.
#[derive(Debug, Parser)]
#[command(name = "fourfold", version)]
struct Cli {
    /// JSON config with a section per command; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads [hardware parallelism]
    #[arg(long, global = true, env = "FOURFOLD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Propagate a field or image by angular spectrum
    Propagate(PropagateArgs),
    /// Push one image through one 4f correlator
    Run4f(Run4fArgs),
    /// Run every correlator of a layer and write the maps
    Layer(LayerArgs),
    /// Measure leakage into neighbouring tiles
    Crosstalk(CrosstalkArgs),
    /// Emit the latency, power and energy model
    Analyze(AnalyzeArgs),
    /// Compare optical outputs with the electronic convolution
    Compare(CompareArgs),
    /// Run a hybrid network forward pass
    Forward(ForwardArgs),
}

fn merged<T: Serialize + DeserializeOwned>(
    flags: &T,
    file: &ConfigFile,
    name: &str,
) -> CliResult<T> {
    merge(flags, file.section(name), name)
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    if threads == Some(0) {
        return Err(CliError::config("thread count must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("cannot start thread pool: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<Status> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    init_threads(cli.threads.or(file.threads))?;
    match cli.command {
        Command::Propagate(a) => commands::propagate(merged(&a, &file, "propagate")?),
        Command::Run4f(a) => commands::run4f(merged(&a, &file, "run4f")?),
        Command::Layer(a) => commands::layer(merged(&a, &file, "layer")?),
        Command::Crosstalk(a) => commands::crosstalk(merged(&a, &file, "crosstalk")?),
        Command::Analyze(a) => commands::analyze_cmd(merged(&a, &file, "analyze")?),
        Command::Compare(a) => commands::compare(merged(&a, &file, "compare")?),
        Command::Forward(a) => commands::forward(merged(&a, &file, "forward")?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                Status::Config
            } else {
                Status::Success
            }
            .into();
        }
    };
    match run(cli) {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("fourfold: {e}");
            e.status.into()
        }
    }
}
