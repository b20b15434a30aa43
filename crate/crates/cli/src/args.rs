//! Command-line definitions and their translation into core configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wast_core::data::LabelColumn;
use wast_core::{GrowRule, Schedule, TrainConfig, Variant};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "wast", version, about = "Sparse-autoencoder feature selection experiments")]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "WAST_OUT_DIR", default_value = "wast-out")]
    pub out: PathBuf,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one model per seed and write a report for each.
    Train(TrainArgs),
    /// Run every method on every dataset and seed; emit a score table.
    Sweep(SweepArgs),
    /// Compare ablation variants of the importance criteria.
    Ablate(AblateArgs),
    /// Render a topology trace as one PGM image per recorded step.
    Heatmap(HeatmapArgs),
    /// Retrain on training data corrupted with Gaussian noise of each std.
    NoiseSweep(NoiseSweepArgs),
    /// Generate a synthetic dataset with a ground-truth sidecar.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Attention-guided regrowth.
    Wast,
    /// Random regrowth with magnitude criteria, updated once per epoch.
    Qs,
}

impl Method {
    pub fn base_config(self) -> TrainConfig {
        match self {
            Method::Wast => TrainConfig::default(),
            Method::Qs => TrainConfig::qs(),
        }
    }
}

/// Configuration layering: method preset, then `--config` file, then flags,
/// then `--set` pairs.
#[derive(Clone, Debug, Default, Args)]
pub struct ConfigArgs {
    /// Config file with `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub sparsity: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub grow_rule: Option<GrowRule>,
    #[arg(long)]
    pub schedule: Option<Schedule>,
    #[arg(long)]
    pub variant: Option<Variant>,
    /// First seed; runs use `seed, seed + 1, ...`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override any config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn resolve(&self, method: Method) -> Result<TrainConfig> {
        let mut cfg = method.base_config();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            cfg.apply_kv(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        take!(epochs, hidden, sparsity, alpha, lambda, lr, batch, noise_std, grow_rule, schedule, variant, seed);
        for pair in &self.set {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{pair}'")))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Args)]
pub struct DataArgs {
    /// Training data file (CSV or libsvm). Repeat for several datasets.
    #[arg(long, required_unless_present = "synth")]
    pub data: Vec<PathBuf>,
    /// Test data paired with each `--data`; without it the data is split.
    #[arg(long)]
    pub test: Vec<PathBuf>,
    /// Use the built-in synthetic fixture (2000 x 500, 20 informative).
    #[arg(long, conflicts_with = "data")]
    pub synth: bool,
    /// Seed for the synthetic fixture and for train/test splits.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// CSV label column: none, first, last, or a 0-based index.
    #[arg(long, default_value = "last")]
    pub label_col: LabelColumn,
    /// CSV files have a header row.
    #[arg(long)]
    pub header: bool,
    /// Ground-truth JSON; defaults to `<data>.truth.json` when present.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Keep raw feature scales instead of standardizing with training statistics.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value = "wast")]
    pub method: Method,
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Feature counts to select and evaluate.
    #[arg(long, value_delimiter = ',', default_value = "50")]
    pub ks: Vec<usize>,
    /// Write the per-neuron edge-count trace (`trace.csv`) for heatmaps.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "wast,qs")]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "25,50,75,100,150,200")]
    pub ks: Vec<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "full,no_gradient,no_weight,no_momentum,no_neuron_in_drop"
    )]
    pub variants: Vec<Variant>,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "50")]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct NoiseSweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long, value_enum, default_value = "wast")]
    pub method: Method,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8")]
    pub stds: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "50")]
    pub ks: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Trace CSV with `step,neuron,edge_count` rows.
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 500)]
    pub features: usize,
    #[arg(long, default_value_t = 20)]
    pub informative: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long, default_value_t = 2.0)]
    pub sep: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// File name inside the output directory.
    #[arg(long, default_value = "synth.csv")]
    pub name: String,
}
