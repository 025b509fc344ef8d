use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trustgnn::error::ErrorKind;

mod commands;
mod config;

use config::ConfigArgs;

/// Trust evaluation with typed trust-chain propagation.
#[derive(Debug, Parser)]
#[command(name = "trustgnn", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a raw edge list to canonical TSV plus a node-map sidecar.
    Convert {
        /// Raw dump (tab/space columns or Graphviz edges) or a canonical file.
        input: PathBuf,
        /// Canonical TSV to write; the sidecar goes next to it.
        output: PathBuf,
        /// Number of trust levels.
        #[arg(long, env = "TRUSTGNN_NUM_RELATIONS", default_value_t = 4)]
        num_relations: usize,
    },
    /// Train one model and write its checkpoint, metrics and loss history.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also run `repeats` seeds and write a mean/std summary.
        #[arg(long)]
        repeat: bool,
        /// Parallel runs for --repeat.
        #[arg(long, env = "TRUSTGNN_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Recompute the test metrics of a checkpoint on its dataset split.
    Eval {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score `src<TAB>dst` pairs given by original node ids.
    Predict {
        #[command(flatten)]
        config: ConfigArgs,
        /// Pairs file, one `src<TAB>dst` per line.
        #[arg(long, env = "TRUSTGNN_PAIRS", value_name = "FILE")]
        pairs: PathBuf,
        /// Output TSV `src dst predicted_level p0 .. p3`.
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Rank chain types by attention weight.
    Explain {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of chain types to report.
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
    /// Repeated runs over a grid of one hyper-parameter.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// `k`, `node_dim`, `edge_dim` or `train_ratio`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values, e.g. `1,2,3`.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Parallel runs per cell.
        #[arg(long, env = "TRUSTGNN_WORKERS", default_value_t = 1)]
        workers: usize,
    },
    /// Run the built-in invariant and gradient checks.
    Selfcheck {
        /// Random graphs for the reach-sum oracles.
        #[arg(long, default_value_t = 200)]
        oracle_graphs: usize,
        /// Seed for the generated instances.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// Bad invocation or configuration; exit code 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Self-check reported failures; exit code 3.
#[derive(Debug)]
pub struct ChecksFailed(pub usize);

impl fmt::Display for ChecksFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} self-check(s) failed", self.0)
    }
}

impl std::error::Error for ChecksFailed {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<ChecksFailed>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<trustgnn::Error>() {
            return match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            };
        }
    }
    2
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Convert {
            input,
            output,
            num_relations,
        } => commands::convert(&input, &output, num_relations),
        Command::Train {
            config,
            repeat,
            workers,
        } => commands::train(&config.resolve()?, repeat, workers),
        Command::Eval { config } => commands::eval(&config.resolve()?),
        Command::Predict { config, pairs, output } => commands::predict(&config.resolve()?, &pairs, &output),
        Command::Explain { config, top_k } => commands::explain(&config.resolve()?, top_k),
        Command::Sweep {
            config,
            axis,
            values,
            workers,
        } => commands::sweep(&config.resolve()?, &axis, &values, workers),
        Command::Selfcheck { oracle_graphs, seed } => commands::selfcheck(oracle_graphs, seed),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
