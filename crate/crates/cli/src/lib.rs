//! Command-line driver for forgetting-network unlearning experiments.

pub mod commands;
pub mod config;
pub mod error;
pub mod svg;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fnn_core::engine::OptimalCriterion;
use fnn_core::theory::Activation;

pub use commands::RunSettings;
pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "fnn", version, about = "Machine unlearning with forgetting neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config file (`key = value` lines).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep only the first N training samples.
    #[arg(long, value_name = "N")]
    pub subset: Option<usize>,
    /// No per-epoch progress on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

impl RunArgs {
    pub fn settings(&self) -> RunSettings {
        RunSettings {
            config: self.config.clone(),
            out: self.out.clone(),
            seed: self.seed,
            subset: self.subset,
            quiet: self.quiet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Sigmoid,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Self {
        match a {
            ActivationArg::Relu => Activation::Relu,
            ActivationArg::Sigmoid => Activation::Sigmoid,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the learning/unlearning schedule and write metrics, checkpoints and curves.
    Train(RunArgs),
    /// Pretrain, then fine-tune on the forget (or retain) set for the same epoch budget.
    Baseline(RunArgs),
    /// Check the forgetting scaling laws on random networks.
    VerifyTheory {
        /// Random shallow networks; half as many deep stacks are checked too.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Activation assumed by the positive checks (sigmoid is expected to fail).
        #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
        activation: ActivationArg,
    },
    /// Score a checkpoint with the membership-inference attack.
    Mia {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render a metrics CSV as an SVG chart.
    Plot {
        /// Metrics CSV written by `train` or `baseline`
        metrics: PathBuf,
        /// Where to write the SVG
        output: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        target_accuracy: f64,
        #[arg(long, default_value_t = 0.10)]
        mia_tolerance: f64,
        #[arg(long, default_value = "learning and unlearning curves")]
        title: String,
    },
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(args) => commands::cmd_train(&args.settings()),
        Command::Baseline(args) => commands::cmd_baseline(&args.settings()),
        Command::VerifyTheory {
            trials,
            seed,
            activation,
        } => commands::cmd_verify_theory(trials, seed, activation.into()),
        Command::Mia { checkpoint, run } => {
            commands::cmd_mia(&checkpoint, &run.settings()).map(|_| ())
        }
        Command::Plot {
            metrics,
            output,
            target_accuracy,
            mia_tolerance,
            title,
        } => commands::cmd_plot(
            &metrics,
            &output,
            &OptimalCriterion {
                target_accuracy,
                mia_tolerance,
            },
            &title,
        ),
    }
}
