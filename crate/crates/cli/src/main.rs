use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stlstm_cli::commands;
use stlstm_cli::config::SweepAxis;
use stlstm_cli::{CliResult, ExperimentConfig};

#[derive(Parser)]
#[command(name = "stlstm", version, about = "Train and compare sparse time LSTM models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration entry, e.g. `--set model.hidden_dense=16`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::load(self.config.as_deref(), &self.set, self.seed, self.out.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the train/val/test datasets and their manifest.
    Prepare(Common),
    /// Train a model with early stopping.
    Train {
        #[command(flatten)]
        common: Common,
        /// Read prepared splits from this directory instead of rebuilding them.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score a checkpoint on one split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Compare analytic gradients with finite differences on a tiny model.
    Gradcheck(Common),
    /// Paired TLSTM/STLSTM comparisons along one axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        axis: Option<SweepAxis>,
    },
}

fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Prepare(c) => commands::prepare(&c.load()?),
        Command::Train { common, data } => commands::train(&common.load()?, data.as_deref()),
        Command::Eval {
            common,
            checkpoint,
            split,
            data,
        } => commands::eval(&common.load()?, checkpoint.as_deref(), &split, data.as_deref()),
        Command::Gradcheck(c) => commands::gradcheck(&c.load()?),
        Command::Sweep { common, axis } => commands::sweep_cmd(&common.load()?, axis),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(msg) => {
            print!("{msg}");
            if !msg.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
