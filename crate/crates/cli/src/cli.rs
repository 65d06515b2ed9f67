use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::config::parse_assignment;

#[derive(Debug, Parser)]
#[command(name = "fpcg", version, about = "Fetal phonocardiography benchmark pipelines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic records with labels and heart-rate ground truth.
    Simulate(SimulateArgs),
    /// Run a heart-sound detector over every record of a manifest.
    Detect(DetectArgs),
    /// Fit an HSMM segmentation model on annotated records.
    Train(TrainArgs),
    /// Score detections against the manifest annotations.
    Evaluate(EvaluateArgs),
    /// K-fold cross-validation of a trainable detector.
    Crossval(CrossvalArgs),
    /// Estimate the heart-rate series of every record.
    Fhr(FhrArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Teager,
    Rms,
    Heuristic,
    Kfd,
    Hsmm,
    LrHsmm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Teager => "teager",
            Method::Rms => "rms",
            Method::Heuristic => "heuristic",
            Method::Kfd => "kfd",
            Method::Hsmm => "hsmm",
            Method::LrHsmm => "lr-hsmm",
        }
    }

    pub fn is_trainable(self) -> bool {
        matches!(self, Method::Hsmm | Method::LrHsmm)
    }

    pub fn default_preset(self) -> &'static str {
        match self {
            Method::Hsmm => "schmidt",
            _ => "mueller",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FhrMethod {
    Labels,
    Tang,
    Zahorian,
}

/// Options shared by commands that take a method configuration.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ConfigArgs {
    /// JSON file overriding the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one field, e.g. `--set noise.white.enabled=true`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_assignment)]
    pub set: Vec<(String, Value)>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Seed of the first record; record `i` uses `seed + i`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub base_fhr: Option<f64>,
    /// Adds white noise at this SNR in dB.
    #[arg(long)]
    pub snr: Option<f64>,
    #[arg(long, default_value = "sim")]
    pub prefix: String,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub out: PathBuf,
    /// Trained model for `hsmm` and `lr-hsmm`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Annotated manifest to train `hsmm` or `lr-hsmm` on before detecting.
    #[arg(long)]
    pub train_manifest: Option<PathBuf>,
    /// HSMM preset: mueller, springer or schmidt.
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "lr-hsmm")]
    pub method: Method,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding `<id>.detections.csv` files.
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Method name for the report; read from the detection run manifest by default.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long, default_value_t = 30.0)]
    pub tolerance_ms: f64,
    /// Also write Score-vs-Tolerance curves.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long, default_value_t = 100)]
    pub sweep_max_ms: usize,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "lr-hsmm")]
    pub method: Method,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 30.0)]
    pub tolerance_ms: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FhrArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub method: FhrMethod,
    /// Detections to convert with `--method labels`; annotations are used otherwise.
    #[arg(long)]
    pub detections: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}
