use std::path::PathBuf;

use alpf_core::{Architecture, ExperimentConfig, Mode, TrainConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "alpf",
    version,
    about = "Active learning from yes/no questions over a class hierarchy"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run oracle-driven active learning and write per-round metrics.
    Simulate(SimulateArgs),
    /// Compare training on exact labels alone against exact plus coarse labels.
    TrainPartial(TrainPartialArgs),
    /// Write a synthetic hierarchical dataset directory.
    GenData(GenDataArgs),
    /// Serve live annotation sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// A preset (`synth16`, `toy`) or a dataset directory.
    #[arg(long, default_value = "synth16")]
    pub data: String,
    /// Seed for generating a preset dataset.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Hierarchy file overriding the dataset's own.
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().beta1)]
    pub beta1: f64,
    #[arg(long, default_value_t = TrainConfig::default().beta2)]
    pub beta2: f64,
    #[arg(long, default_value_t = TrainConfig::default().epsilon)]
    pub epsilon: f64,
    #[arg(long, default_value_t = TrainConfig::default().minibatch_size)]
    pub minibatch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    /// Mixed into every re-training's initialization and shuffling seed.
    #[arg(long, default_value_t = 0)]
    pub train_seed: u64,
    /// Use a one-hidden-layer ReLU network of this width instead of a linear model.
    #[arg(long)]
    pub hidden: Option<usize>,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            minibatch_size: self.minibatch_size,
            epochs: self.epochs,
            seed: self.train_seed,
            architecture: match self.hidden {
                Some(hidden) => Architecture::Mlp { hidden },
                None => Architecture::Linear,
            },
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Learner to run, e.g. `baseline`, `al-me`, `aq-erc`, `alpf-eig`.
    #[arg(long, conflicts_with_all = ["grid", "manifest"], required_unless_present_any = ["grid", "manifest"])]
    pub mode: Option<Mode>,
    /// Run every mode of a named grid (`default`: all nine learners).
    #[arg(long, value_parser = ["default"])]
    pub grid: Option<String>,
    /// Re-run exactly what a previous run's manifest.json describes.
    #[arg(long, conflicts_with_all = ["grid", "mode"])]
    pub manifest: Option<PathBuf>,
    /// Total binary questions allowed, warm-start included. Unlimited if absent.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Questions between re-trainings.
    #[arg(long, default_value_t = 1000)]
    pub retrain_interval: usize,
    /// Fraction of the pool exactly labeled before active selection.
    #[arg(long, default_value_t = 0.05)]
    pub warm_start_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Output root; results go to `<out>/<mode>/<seed>/`.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

impl SimulateArgs {
    pub fn config(&self, mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            mode,
            warm_start_fraction: self.warm_start_fraction,
            retrain_interval: self.retrain_interval,
            budget: self.budget.unwrap_or(usize::MAX),
            train: self.train.config(),
            seed: self.seed,
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainPartialArgs {
    /// Comma-separated fractions of exactly labeled examples.
    #[arg(long, default_value = "0.2,0.4,0.6,0.8", value_delimiter = ',')]
    pub gammas: Vec<f64>,
    /// Comma-separated coarseness levels for the remaining examples.
    #[arg(long, default_value = "1,2", value_delimiter = ',')]
    pub levels: Vec<usize>,
    /// Seed choosing the exact subset.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Also write the table as CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    /// Training examples.
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Holdout examples; half of `n` if absent.
    #[arg(long)]
    pub holdout: Option<usize>,
    #[arg(long, default_value_t = 32)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub branching: usize,
    #[arg(long, default_value_t = 4.0)]
    pub root_scale: f64,
    #[arg(long, default_value_t = 0.5)]
    pub decay: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, env = "ALPF_HOST", default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, env = "ALPF_PORT", default_value_t = 8080)]
    pub port: u16,
    #[arg(long, env = "ALPF_SESSION_DIR", default_value = "sessions")]
    pub session_dir: PathBuf,
    /// Base directory for dataset references in session requests.
    #[arg(long, default_value = ".")]
    pub data_root: PathBuf,
    /// Allowed browser origin for CORS; any origin if absent.
    #[arg(long)]
    pub cors_origin: Option<String>,
}
