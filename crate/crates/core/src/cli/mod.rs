//! `chebqr <generate-data|train|evaluate|sweep|invert>`.

mod commands;
mod config;
mod run;

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

use crate::cheb::{EndpointRule, IntegrationLength};
use crate::data::GlassesNormalization;
use crate::error::{Error, Result};
use crate::models::{ModelConfig, ModelFamily};
use crate::nnet::Activation;

pub use config::{DataConfig, RunConfig};
pub use commands::GENERATORS;
pub use run::{
    evaluate_run, load_run, resolve_fold, run_fold, train_run, EvaluatedRun, ModelManifest, TrainingSummary, CHECKPOINT_FILE,
    CONFIG_FILE, FAN_FILE, HISTORY_FILE, INVERT_FILE, MANIFEST_FILE, REPORT_FILE,
};

/// Default output root when neither `--out` nor `CHEBQR_OUT` is set.
pub const DEFAULT_OUT: &str = "chebqr-out";

#[derive(Debug, Parser)]
#[command(name = "chebqr", version, about = "Non-crossing quantile regression with Chebyshev derivatives")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "CHEBQR_OUT")]
    pub out: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,
}

impl GlobalArgs {
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset and its manifest.
    GenerateData(GenerateArgs),
    /// Train one (model, fold) and write checkpoint, manifest, history and config.
    Train(TrainArgs),
    /// Evaluate a trained run and write its report and a quantile-fan CSV.
    Evaluate(EvaluateArgs),
    /// Train and evaluate every (model, fold) cell and aggregate the results.
    Sweep(SweepArgs),
    /// Map (x, y) rows to quantile levels with a trained Chebyshev model.
    Invert(InvertArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Generator name (known: glasses).
    pub dataset: String,
    #[arg(long, value_enum, default_value_t = NormalizationArg::MaxAbsY)]
    pub normalization: NormalizationArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    MaxAbsY,
    PerColumn,
    None,
}

impl From<NormalizationArg> for GlassesNormalization {
    fn from(v: NormalizationArg) -> Self {
        match v {
            NormalizationArg::MaxAbsY => GlassesNormalization::MaxAbsY,
            NormalizationArg::PerColumn => GlassesNormalization::PerColumn,
            NormalizationArg::None => GlassesNormalization::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArchArg {
    /// One hidden layer of 200, split between φ_w and K_w.
    Uci,
    /// Hidden layers 120, 60, 10.
    Glasses,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Softplus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EndpointArg {
    Halved,
    AsPrinted,
}

/// Dataset, model and optimizer flags shared by `train` and `sweep`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Dataset CSV (header row; a `split` column of 0/1/2 fixes train/val/test).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column (default: last non-split column).
    #[arg(long)]
    pub target: Option<String>,
    #[arg(long)]
    pub n_folds: Option<usize>,
    #[arg(long)]
    pub test_ratio: Option<f64>,
    #[arg(long)]
    pub val_ratio: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Architecture preset applied before the individual overrides.
    #[arg(long, value_enum)]
    pub arch: Option<ArchArg>,
    /// Comma-separated hidden widths.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub split_hidden: Option<bool>,
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    /// Chebyshev degree d of the Ours families.
    #[arg(long = "d")]
    pub degree: Option<usize>,
    /// Clenshaw-Curtis degree of NAM.
    #[arg(long = "nam-d")]
    pub nam_degree: Option<usize>,
    /// Keep only d integrated coefficients instead of d + 1.
    #[arg(long)]
    pub truncate_to_d: bool,
    #[arg(long, value_enum)]
    pub endpoint_rule: Option<EndpointArg>,
    /// Penalty weight of IQN-P / IQN-D.
    #[arg(long = "lambda")]
    pub penalty_weight: Option<f64>,
    /// Central-difference step of IQN-D.
    #[arg(long)]
    pub penalty_step: Option<f64>,
    #[arg(long)]
    pub monotone_fraction: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub n_tau: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub fold: Option<usize>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Dataset override (defaults to the path recorded in the manifest).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated quantile levels for the fan CSV.
    #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
    pub taus: Option<Vec<f64>>,
    /// Fan grid: `980` (0.010..0.990), `roots` (Chebyshev roots) or a count n (j/(n+1)).
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Comma-separated model families.
    #[arg(long, value_delimiter = ',', required = true)]
    pub models: Vec<String>,
    /// Number of folds to run (default: all folds of the plan).
    #[arg(long)]
    pub folds: Option<usize>,
    /// Reuse finished cells whose echoed config matches.
    #[arg(long)]
    pub resume: bool,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub run: PathBuf,
    /// CSV holding the feature columns of the run and a target column.
    #[arg(long)]
    pub input: PathBuf,
    /// Target column of the input (default: the training target name).
    #[arg(long)]
    pub target: Option<String>,
    /// Absolute tolerance on |P(τ*) − y| in original units.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
}

impl RunArgs {
    /// Applies the flags on top of `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        let d = &mut cfg.data;
        if let Some(p) = &self.data {
            d.path = Some(p.clone());
        }
        if let Some(t) = &self.target {
            d.csv.target_column = Some(t.clone());
        }
        set(&mut d.n_folds, self.n_folds);
        set(&mut d.test_ratio, self.test_ratio);
        set(&mut d.val_ratio, self.val_ratio);
        set(&mut d.split_seed, self.split_seed);

        let m = &mut cfg.model;
        if let Some(arch) = self.arch {
            let preset = match arch {
                ArchArg::Uci => ModelConfig::uci(m.family),
                ArchArg::Glasses => ModelConfig::glasses(m.family),
            };
            m.hidden = preset.hidden;
            m.split_hidden = preset.split_hidden;
        }
        if let Some(h) = &self.hidden {
            m.hidden = h.clone();
        }
        set(&mut m.split_hidden, self.split_hidden);
        if let Some(a) = self.activation {
            m.activation = match a {
                ActivationArg::Relu => Activation::Relu,
                ActivationArg::Softplus => Activation::Softplus,
            };
        }
        set(&mut m.degree, self.degree);
        set(&mut m.nam_degree, self.nam_degree);
        if self.truncate_to_d {
            m.integration_length = IntegrationLength::TruncateToDegree;
        }
        if let Some(e) = self.endpoint_rule {
            m.endpoint_rule = match e {
                EndpointArg::Halved => EndpointRule::Halved,
                EndpointArg::AsPrinted => EndpointRule::AsPrinted,
            };
        }
        set(&mut m.penalty_weight, self.penalty_weight);
        set(&mut m.penalty_step, self.penalty_step);
        set(&mut m.monotone_fraction, self.monotone_fraction);

        let t = &mut cfg.train;
        set(&mut t.max_epochs, self.epochs);
        set(&mut t.patience, self.patience);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.n_tau, self.n_tau);
        set(&mut t.optimizer.learning_rate, self.learning_rate);
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Defaults, then `--config`, then `--seed`.
pub fn base_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, global.seed);
    Ok(cfg)
}

pub fn parse_family(name: &str) -> Result<ModelFamily> {
    name.parse()
}

pub fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::GenerateData(a) => commands::generate_data(g, a),
        Command::Train(a) => commands::train(g, a),
        Command::Evaluate(a) => commands::evaluate(g, a),
        Command::Sweep(a) => commands::sweep(g, a),
        Command::Invert(a) => commands::invert(g, a),
    }
}

/// 2 configuration/usage, 3 data, 4 numeric divergence, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Usage(_) | Error::InvalidDegree { .. } => 2,
        Error::Data(_) | Error::Parse { .. } | Error::Csv(_) | Error::OutOfSupport { .. } => 3,
        Error::Diverged { .. } | Error::NonFinite(_) | Error::NoConvergence { .. } => 4,
        _ => 1,
    }
}
