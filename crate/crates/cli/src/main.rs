//! `ipred`: synthetic data, featurization, training, fusion, evaluation and
//! prediction driven by one JSON config.

mod commands;
mod config;
mod error;
mod frames;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::commands::Context;
use crate::config::Config;
use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "ipred",
    version,
    about = "Interaction prediction from partial videos"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving every artifact.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic dataset as PNG frames plus meta.json.
    Synth(Common),
    /// Extract context and flow features into features.jsonl.
    Featurize(Common),
    /// Train the four models of every fold.
    Train(Common),
    /// Learn the non-negative fusion weights of every fold.
    Fuse(Common),
    /// Accuracy at every observation ratio.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Use this weights file for every fold instead of the learned ones.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Predict one test video from a partial observation.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        video: String,
        /// Observation ratio index: frames up to round(n * ratio / 10).
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u8).range(1..=10))]
        ratio: u8,
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Include the per-step trace.
        #[arg(long)]
        verbose: bool,
    },
}

fn context(common: &Common) -> CliResult<Context> {
    let cfg = Config::load(&common.config, common.seed)?;
    Ok(Context::new(cfg, common.out.clone()))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(c) => commands::synth(&context(&c)?),
        Command::Featurize(c) => commands::featurize(&context(&c)?),
        Command::Train(c) => commands::train(&context(&c)?),
        Command::Fuse(c) => commands::fuse(&context(&c)?),
        Command::Eval { common, weights } => commands::eval(&context(&common)?, weights.as_deref()),
        Command::Predict {
            common,
            video,
            ratio,
            weights,
            verbose,
        } => commands::predict(
            &context(&common)?,
            &video,
            ratio as usize,
            weights.as_deref(),
            verbose,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IP_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = json!({ "error": { "kind": "usage", "message": e.to_string().trim_end() } });
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
