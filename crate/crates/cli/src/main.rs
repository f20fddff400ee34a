mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::UsageError;

#[derive(Parser)]
#[command(name = "slavgae", version, about = "Semi-supervised inductive node classification with a label-augmented VGAE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file, dotted overrides and seed, applied in that order.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// JSON config file; omitted keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set ablation.no_pseudo=true`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    /// Overrides `seed` after everything else.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint.json, history.csv, metrics.json and resolved-config.json.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print accuracy and MCC of a checkpoint on one role.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        splits: PathBuf,
        /// train_labeled, train_unlabeled, val or test.
        #[arg(long, default_value = "test")]
        role: String,
    },
    /// Write node_id,predicted_class,max_probability for every node.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Feeds the labels of train_labeled nodes to the encoder, as in eval.
        /// Without it the label input is all zeros.
        #[arg(long)]
        splits: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a stochastic block model dataset.
    Synth {
        #[arg(long = "sbm-config")]
        sbm_config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign node roles and write splits.csv.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Finite-difference check of the training objective's gradient on small random instances.
    Gradcheck {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        instances: usize,
    },
    /// Train over a grid of one hyperparameter and several seeds; writes a summary CSV.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        /// K, p, theta or labeling_rate.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Replicates per value; replicate j uses seed + j.
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy, Debug)]
pub struct SplitArgs {
    #[arg(long = "val-fraction", default_value_t = 0.25)]
    pub val_fraction: f64,
    #[arg(long = "test-fraction", default_value_t = 0.25)]
    pub test_fraction: f64,
    /// Share of the training nodes that keep their label.
    #[arg(long = "labeling-rate", default_value_t = 0.01)]
    pub labeling_rate: f64,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<slavgae::Error>() {
        Some(e) if e.is_config_error() || matches!(e, slavgae::Error::InvalidQuery(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train { data, splits, out, config } => commands::train(&data, &splits, &out, &config),
        Command::Eval { checkpoint, data, splits, role } => commands::eval(&checkpoint, &data, &splits, &role),
        Command::Predict { checkpoint, data, splits, out } => {
            commands::predict(&checkpoint, &data, splits.as_deref(), &out)
        }
        Command::Synth { sbm_config, sets, seed, out } => commands::synth(sbm_config.as_deref(), &sets, seed, &out),
        Command::Split { data, out, split, seed } => commands::split(&data, &out, split, seed),
        Command::Gradcheck { config, instances } => commands::gradcheck(&config, instances),
        Command::Sweep { data, param, values, seeds, split, config, out } => {
            commands::sweep(&data, &param, &values, seeds, split, &config, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
