use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mechrl_core::baseline::Policy;
use mechrl_core::Error;

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "mechrl", version, about = "Cell-based compliant mechanism design with a dueling DQN")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's training seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (or file for `render`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Built-in scenario name or scenario JSON file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Design file (JSON).
    #[arg(long)]
    pub design: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Unit-cell load tests: one CSV per kind plus an ordering report.
    Characterize {
        /// `all` or comma-separated cell codes.
        #[arg(long, default_value = "all")]
        kinds: String,
        #[command(flatten)]
        common: Common,
    },
    /// Probe values, reward and area density of a design.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Train the agent; writes the curve, best design, checkpoint and SVG.
    Train {
        /// Continue from a checkpoint file.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Overrides the config's episode count.
        #[arg(long)]
        episodes: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Random or greedy reference rollouts.
    Baseline {
        /// `random` (uniform actions) or `greedy` (one-step lookahead).
        #[arg(long, default_value = "random")]
        policy: Policy,
        /// Number of rollouts.
        #[arg(short = 'n', long, default_value_t = 1000)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// SVG of a design, with the deformed shape when a scenario is given.
    Render {
        /// Displacement magnification (default: autoscale).
        #[arg(long)]
        scale: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Checkpoint(_) => 4,
        e if e.is_numeric() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Characterize { kinds, common } => commands::characterize(&kinds, &common),
        Command::Evaluate { common } => commands::evaluate(&common),
        Command::Train { resume, episodes, common } => commands::train(&common, resume.as_deref(), episodes),
        Command::Baseline { policy, n, common } => commands::baseline(&common, policy, n),
        Command::Render { scale, common } => commands::render(&common, scale),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mechrl: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
