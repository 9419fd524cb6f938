//! Command-line front end: `train`, `eval`, `ablate` and `synth`.
//!
//! Every command writes its results into an output directory and reports
//! failures on standard error with a stable exit status:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | invalid configuration |
//! | 3 | unreadable or invalid data |
//! | 4 | training failed |
//! | 5 | model and dataset do not fit together |

mod archive;
mod commands;

pub use archive::{ArchiveError, DatasetFingerprint, ModelArchive, FORMAT_VERSION, MAGIC};
pub use commands::{
    ablation_csv, cmd_ablate, cmd_eval, cmd_synth, cmd_train, AblationRow, HoldoutSummary,
    TrainSummary,
};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::dataset::{DatasetError, Normalization, SynthSpec};
use crate::recognizer::{Direction, Distance, EvalError};
use crate::trainer::{Hyperparams, TrainError, Variant};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("model does not match dataset: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Training(_) => 4,
            CliError::Mismatch(_) => 5,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidSpec(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::InvalidHyper(_) | TrainError::TooFewRows { .. } => CliError::Config(e.to_string()),
            _ => CliError::Training(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::DimensionMismatch(_) | EvalError::UnsupportedVariant(_) => {
                CliError::Mismatch(e.to_string())
            }
            EvalError::InvalidK { .. } | EvalError::InvalidFraction(_) => CliError::Config(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Tuned λ1..λ4 for the four standard benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Awa,
    Cub,
    Sun,
    Imnet,
}

impl Preset {
    pub fn lambdas(self) -> [f64; 4] {
        match self {
            Preset::Awa => [1e-3, 1e3, 1e7, 1e2],
            Preset::Cub => [1.0, 1e-3, 1e4, 1e-1],
            Preset::Sun => [1e-4, 1e-2, 1e-4, 1e-4],
            Preset::Imnet => [1e-5, 1e-5, 1e1, 1e-4],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Awa => "awa",
            Preset::Cub => "cub",
            Preset::Sun => "sun",
            Preset::Imnet => "imnet",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jcmspl", version, about = "Zero-shot recognition with a joint concept space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on the seen split of a dataset.
    Train(TrainArgs),
    /// Evaluate a trained model.
    Eval(EvalArgs),
    /// Train and evaluate every variant with shared settings.
    Ablate(AblateArgs),
    /// Write a synthetic dataset with a planted ground-truth model.
    Synth(SynthArgs),
}

/// Optimizer settings shared by `train` and `ablate`.
#[derive(Debug, Clone, Args)]
pub struct HyperArgs {
    /// Concept-space dimension.
    #[arg(long)]
    pub k: usize,
    /// Start from the tuned λ values of a standard benchmark.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub lambda3: Option<f64>,
    #[arg(long)]
    pub lambda4: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub t_max: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Seed of the random initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    pub ridge_eps: f64,
    /// Visual feature normalization: none or l2.
    #[arg(long, default_value_t = Normalization::L2Columns)]
    pub normalize: Normalization,
}

impl HyperArgs {
    /// Defaults, overlaid by the preset, overlaid by explicit λ flags.
    pub fn resolve(&self, variant: Variant) -> Hyperparams {
        let mut h = Hyperparams::new(self.k);
        if let Some(p) = self.preset {
            [h.lambda1, h.lambda2, h.lambda3, h.lambda4] = p.lambdas();
        }
        let flags = [self.lambda1, self.lambda2, self.lambda3, self.lambda4];
        for (slot, flag) in [&mut h.lambda1, &mut h.lambda2, &mut h.lambda3, &mut h.lambda4]
            .into_iter()
            .zip(flags)
        {
            if let Some(v) = flag {
                *slot = v;
            }
        }
        h.t_max = self.t_max;
        h.tol = self.tol;
        h.seed = self.seed;
        h.ridge_eps = self.ridge_eps;
        h.variant = variant;
        h
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = Variant::Full)]
    pub variant: Variant,
    /// Hold out this fraction of each seen class for generalized evaluation.
    #[arg(long)]
    pub holdout: Option<f64>,
    /// Seed of the holdout split; pass the same value to `eval --seed`.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = Direction::V2s)]
    pub direction: Direction,
    #[arg(long, default_value_t = Distance::Cosine)]
    pub distance: Distance,
    /// Also report the fraction of unseen samples whose class ranks in the top N.
    #[arg(long)]
    pub hit_k: Option<usize>,
    /// Generalized evaluation: held-out seen samples plus unseen samples
    /// against all classes.
    #[arg(long)]
    pub gzsl: bool,
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    /// Seed of the holdout split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to the model's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[arg(long, default_value_t = Distance::Cosine)]
    pub distance: Distance,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthSpec::default().m)]
    pub m: usize,
    #[arg(long, default_value_t = SynthSpec::default().d)]
    pub d: usize,
    #[arg(long, default_value_t = SynthSpec::default().k)]
    pub k: usize,
    /// Number of seen classes.
    #[arg(long, default_value_t = SynthSpec::default().c_s)]
    pub cs: usize,
    /// Number of unseen classes.
    #[arg(long, default_value_t = SynthSpec::default().c_u)]
    pub cu: usize,
    /// Samples per class.
    #[arg(long, default_value_t = SynthSpec::default().samples_per_class)]
    pub spc: usize,
    #[arg(long, default_value_t = SynthSpec::default().noise_sigma)]
    pub noise: f64,
    #[arg(long, default_value_t = SynthSpec::default().seed)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            m: self.m,
            d: self.d,
            k: self.k,
            c_s: self.cs,
            c_u: self.cu,
            samples_per_class: self.spc,
            noise_sigma: self.noise,
            seed: self.seed,
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit status.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return u8::try_from(e.exit_code()).unwrap_or(2);
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a).map(|_| ()),
        Command::Eval(a) => cmd_eval(a).map(|_| ()),
        Command::Ablate(a) => match cmd_ablate(a) {
            Ok((_, None)) => Ok(()),
            Ok((_, Some(e))) | Err(e) => Err(e),
        },
        Command::Synth(a) => cmd_synth(a).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
