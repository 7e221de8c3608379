//! Flag definitions. Every struct here is also serialized into reports as
//! the resolved configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "wfa", version, about = "Rotation-invariant point features by weight-feature alignment")]
#[command(args_override_self = true)]
pub struct Cli {
    /// TOML file of default flag values; explicit flags take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled synthetic dataset as PLY files plus a manifest.
    GenData(GenDataArgs),
    /// Measure how far aligned features move under random rigid motions.
    InvarianceReport(InvarianceArgs),
    /// Check Procrustes optimality and the alignment's registration gap.
    ProcrustesCheck(ProcrustesArgs),
    /// Train the toy classifier and write a checkpoint and report.
    Train(TrainArgs),
    /// Score a checkpoint under rotated test clouds.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients.
    Gradcheck(GradcheckArgs),
    /// Train once per axis order and rank the orders by accuracy.
    Ablation(AblationArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::InvarianceReport(_) => "invariance-report",
            Command::ProcrustesCheck(_) => "procrustes-check",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Gradcheck(_) => "gradcheck",
            Command::Ablation(_) => "ablation",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    None,
    Z,
    Arbitrary,
}

impl From<ModeArg> for wfa::synthdata::RotationMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::None => Self::None,
            ModeArg::Z => Self::ZOnly,
            ModeArg::Arbitrary => Self::Arbitrary,
        }
    }
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got {s:?}")),
    }
}

fn non_negative_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a non-negative number, got {s:?}")),
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
        _ => Err(format!("expected a number in [0, 1], got {s:?}")),
    }
}

fn order(s: &str) -> Result<wfa::AxisOrder, String> {
    s.parse().map_err(|e: wfa::Error| e.to_string())
}

/// Comma-separated layer widths.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Widths(pub Vec<usize>);

fn widths(s: &str) -> Result<Widths, String> {
    let out: Result<Vec<usize>, _> = s.split(',').map(|w| w.trim().parse::<usize>()).collect();
    match out {
        Ok(v) if !v.is_empty() && v[0] >= 3 && v.iter().all(|&w| w >= 1) => Ok(Widths(v)),
        _ => Err(format!("expected comma-separated widths with the first at least 3, got {s:?}")),
    }
}

/// Synthetic dataset shape; shared by every command that needs data.
#[derive(Clone, Debug, Args, Serialize)]
pub struct DataArgs {
    /// Dataset directory written by gen-data; when absent the dataset is
    /// generated from the flags below.
    #[arg(long, value_name = "DIR")]
    pub data: Option<PathBuf>,
    /// Number of shape classes (sphere, cube, cylinder, cone, torus, in order).
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=5))]
    pub classes: u64,
    #[arg(long, default_value_t = 60, value_parser = clap::value_parser!(u64).range(1..))]
    pub per_class: u64,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(8..))]
    pub points: u64,
    #[arg(long, default_value_t = 0.01, value_parser = non_negative_f64)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct NetArgs {
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub queries: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(3..))]
    pub neighbors: u64,
    #[arg(long, default_value_t = 0.35, value_parser = positive_f64)]
    pub radius: f64,
    /// Hidden layer widths, comma separated; the first is the aligned layer.
    #[arg(long, default_value = "64,128", value_parser = widths)]
    pub widths: Widths,
    /// Axis pairing as a permutation of 1..3, e.g. 123 (default) or 321.
    #[arg(long, default_value = "123", value_parser = order)]
    #[serde(serialize_with = "display")]
    pub order: wfa::AxisOrder,
    /// Feed raw centered coordinates instead of aligned ones (baseline).
    #[arg(long)]
    pub no_wfa: bool,
    #[arg(long, default_value_t = 1e-6, value_parser = positive_f64)]
    pub sign_tol: f64,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub gap_tol: f64,
}

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub lr: f64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: u64,
    /// Rotation applied to training clouds.
    #[arg(long, value_enum, default_value_t = ModeArg::Z)]
    pub augment: ModeArg,
    /// Evaluate the test split every N epochs (0: after the last epoch only).
    #[arg(long, default_value_t = 0)]
    pub eval_every: usize,
    #[arg(long, default_value_t = 1234)]
    pub eval_seed: u64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..=5))]
    pub classes: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    pub per_class: u64,
    #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(8..))]
    pub points: u64,
    #[arg(long, default_value_t = 0.01, value_parser = non_negative_f64)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.8, value_parser = fraction)]
    pub train_fraction: f64,
    /// Store analytic normals in the PLY files.
    #[arg(long)]
    pub normals: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct InvarianceArgs {
    /// Cloud to test (.ply, or .xyz/.csv/.txt); a cone is generated when absent.
    #[arg(long, value_name = "PATH")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.35, value_parser = positive_f64)]
    pub radius: f64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(3..))]
    pub neighbors: u64,
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub queries: u64,
    /// Number of weight points in the random first layer.
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(3..))]
    pub width: u64,
    #[arg(long, default_value_t = 1)]
    pub weight_seed: u64,
    /// Largest translation component applied per trial.
    #[arg(long, default_value_t = 10.0, value_parser = non_negative_f64)]
    pub translation: f64,
    #[arg(long, default_value = "123", value_parser = order)]
    #[serde(serialize_with = "display")]
    pub order: wfa::AxisOrder,
    #[arg(long, default_value_t = 1e-6, value_parser = positive_f64)]
    pub sign_tol: f64,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub gap_tol: f64,
    /// Deviation above which the command exits with status 4.
    #[arg(long, default_value_t = 1e-9, value_parser = positive_f64)]
    pub tolerance: f64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ProcrustesArgs {
    #[arg(long, default_value_t = 100)]
    pub instances: usize,
    /// Random rotations tried per fixed-correspondence instance.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Random rotations tried per nearest-neighbor registration instance.
    #[arg(long, default_value_t = 2_000)]
    pub registration_samples: usize,
    /// Points per instance.
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(3..))]
    pub points: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving model.ckpt and report.json.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long, value_name = "PATH")]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Rotation modes to score; all three when absent.
    #[arg(long, value_enum)]
    pub mode: Vec<ModeArg>,
    /// Score the training split instead of the test split.
    #[arg(long)]
    pub train_split: bool,
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub configs: u64,
    #[arg(long, default_value_t = 1e-5, value_parser = positive_f64)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1e-3, value_parser = positive_f64)]
    pub worst_tolerance: f64,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct AblationArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    /// Training seeds per order are `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Orders to compare; all six when absent.
    #[arg(long = "orders", value_parser = order, value_delimiter = ',')]
    #[serde(serialize_with = "display_all")]
    pub orders: Vec<wfa::AxisOrder>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

fn display_all<S: serde::Serializer>(v: &[wfa::AxisOrder], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|o| o.to_string()))
}
