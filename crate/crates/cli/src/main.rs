//! `hamflow` command-line driver.
//!
//! Exit status: 0 on success, 1 when a hard check fails, 2 on usage errors,
//! 3 on any other error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] hamflow::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Parser, Debug)]
#[command(
    name = "hamflow",
    version,
    about = "Graph neural flows: training, stability diagnostics and attacks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment configuration; defaults apply to absent keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set train.epochs=50`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Flow of every configured model (grand, grand_l, grand_nl, graphcon, graphbel, hang, hang_quad).
    #[arg(long, global = true)]
    flow: Option<String>,
    /// Damping coefficient of every configured flow.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// GRAND attention: doubly-stochastic, row, column or symmetric.
    #[arg(long, global = true)]
    attention: Option<String>,
    /// Root seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (also HAMFLOW_OUT).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train every configured model; writes checkpoints and history CSVs.
    Train,
    /// Accuracy of saved checkpoints on each split.
    Evaluate {
        /// Checkpoint directories; defaults to every model under `<out>/models`.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
    },
    /// Craft every configured attack against a GCN surrogate and save the results.
    Attack,
    /// Clean and attacked accuracy of every model and the surrogate.
    Suite,
    /// Stability report of every configured flow on the dataset features.
    Stability,
    /// Phase portrait of the two-dimensional linear counterexample.
    Portrait,
    /// Reverse-mode gradients against central differences.
    Gradcheck,
}

fn run(cli: Cli) -> Result<bool, CliError> {
    let overrides = Overrides {
        set: cli.set,
        flow: cli.flow,
        alpha: cli.alpha,
        attention: cli.attention,
        seed: cli.seed,
        output: cli.out,
    };
    let cfg = ExperimentConfig::resolve(cli.config.as_deref(), &overrides)?;
    cfg.validate()?;
    let snapshot = cfg.write_snapshot(&cfg.output)?;
    log::info!("resolved configuration written to {}", snapshot.display());
    match cli.command {
        Command::Train => commands::train_cmd(&cfg),
        Command::Evaluate { checkpoint } => commands::evaluate_cmd(&cfg, &checkpoint),
        Command::Attack => commands::attack_cmd(&cfg),
        Command::Suite => commands::suite_cmd(&cfg),
        Command::Stability => commands::stability_cmd(&cfg),
        Command::Portrait => commands::portrait_cmd(&cfg),
        Command::Gradcheck => commands::gradcheck_cmd(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("HAMFLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(1)
        }
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
