//! Command-line front end. Every subcommand writes its artifacts, a
//! `run-config.json` echo of its arguments and a `metrics.txt` summary
//! under the output directory.

mod commands;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{chain, Result};
use crate::gradsuite::Precision;
use crate::locate::Method;
use crate::quantify::Mode;

pub use output::RunDir;

#[derive(Debug, Parser)]
#[command(name = "kneeoa", version, about = "Knee radiograph localisation and KL-grade quantification")]
pub struct Cli {
    /// Worker threads for per-image stages; 1 is the reference path.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Log progress at info level (RUST_LOG overrides).
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic radiograph dataset.
    Synth(SynthArgs),
    /// Train a localisation FCN.
    TrainFcn(TrainFcnArgs),
    /// Localise knees and write detections.txt.
    Detect(DetectArgs),
    /// Crop knees to 300x200 in canonical orientation.
    Extract(ExtractArgs),
    /// Train a grading CNN.
    TrainCnn(TrainCnnArgs),
    /// Grade annotated knees with a trained CNN and report metrics.
    Evaluate(EvaluateArgs),
    /// Localise and grade every radiograph of a dataset.
    Pipeline(PipelineArgs),
    /// Finite-difference check of every differentiable operation.
    Gradcheck(GradcheckArgs),
    /// Receptive field of a preset layer.
    Rf(RfArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Standard deviation of additive noise in intensity levels.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskArg {
    Roi,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainFcnArgs {
    /// Dataset directory holding manifest.tsv, or a manifest file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Optional held-out dataset scored after every epoch.
    #[arg(long)]
    pub val_data: Option<PathBuf>,
    #[arg(long, default_value = "desk-fcn")]
    pub preset: String,
    #[arg(long, value_enum, default_value_t = MaskArg::Roi)]
    pub mask: MaskArg,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// Learning rate; defaults to 0.001 for Adam and 0.01 for SGD.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// template, svm, fcn-center or fcn-roi.
    #[arg(long, default_value = "fcn-roi")]
    pub method: Method,
    /// FCN checkpoint for the fcn methods.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Annotated dataset the template and svm methods learn from.
    #[arg(long)]
    pub train_data: Option<PathBuf>,
    /// Working raster size relative to the original (template and svm).
    #[arg(long, default_value_t = 0.1)]
    pub downscale: f64,
    /// Template or SVM window in working pixels, `WxH`.
    #[arg(long, default_value = "20x20")]
    pub window: Size,
    /// Window step in working pixels.
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Region extracted about a detected centre: original pixels for
    /// template and svm, canvas pixels for fcn-center. Defaults per method.
    #[arg(long)]
    pub region: Option<Size>,
    /// Canvas the fcn-center region is defined on, `WxH`.
    #[arg(long, default_value = "2560x2560")]
    pub canvas: Size,
    /// Negative windows per training image (svm).
    #[arg(long, default_value_t = 20)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Crop detected regions instead of the annotated ones.
    #[arg(long)]
    pub detections: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCnnArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// clsf, reg, joint or ordinal.
    #[arg(long, default_value = "joint")]
    pub mode: Mode,
    /// Network preset; defaults to the reduced-width preset for the mode.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 80)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Weight of the regression loss in joint and ordinal training.
    #[arg(long, default_value_t = 0.5)]
    pub w_reg: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Grading CNN checkpoint.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub w_reg: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub fcn: PathBuf,
    #[arg(long)]
    pub cnn: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Read the FCN output as joint centres with fixed-size regions.
    #[arg(long)]
    pub centers: bool,
    #[arg(long, default_value = "2560x2560")]
    pub canvas: Size,
    #[arg(long, default_value = "640x560")]
    pub region: Size,
}

#[derive(Debug, Args, Serialize)]
#[command(group = clap::ArgGroup::new("which").required(true).args(["all", "op"]))]
pub struct GradcheckArgs {
    /// Check every operation.
    #[arg(long)]
    pub all: bool,
    /// Check one operation (repeatable).
    #[arg(long)]
    pub op: Vec<String>,
    /// f32, f64 or both.
    #[arg(long, default_value = "both")]
    pub precision: PrecisionArg,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Also check sampled weights of every preset network.
    #[arg(long)]
    pub networks: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecisionArg {
    One(Precision),
    Both,
}

impl PrecisionArg {
    pub fn list(&self) -> Vec<Precision> {
        match self {
            PrecisionArg::One(p) => vec![*p],
            PrecisionArg::Both => vec![Precision::F64, Precision::F32],
        }
    }
}

impl std::str::FromStr for PrecisionArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "both" => Ok(PrecisionArg::Both),
            other => other.parse().map(PrecisionArg::One),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RfArgs {
    #[arg(long)]
    pub preset: String,
    /// Layer name; defaults to the last layer before upsampling.
    #[arg(long)]
    pub layer: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// `WxH` extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Size {
    pub w: usize,
    pub h: usize,
}

impl std::str::FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let bad = || format!("expected WxH, got `{s}`");
        let (w, h) = s.split_once('x').ok_or_else(bad)?;
        let (w, h) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
        if w == 0 || h == 0 {
            return Err(bad());
        }
        Ok(Size { w, h })
    }
}

/// Run a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let threads = cli.threads.max(1);
    match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::TrainFcn(a) => commands::train_fcn(&a),
        Command::Detect(a) => commands::detect(&a, threads),
        Command::Extract(a) => commands::extract(&a, threads),
        Command::TrainCnn(a) => commands::train_cnn(&a, threads),
        Command::Evaluate(a) => commands::evaluate(&a, threads),
        Command::Pipeline(a) => commands::pipeline(&a, threads),
        Command::Gradcheck(a) => commands::gradcheck(&a),
        Command::Rf(a) => commands::rf(&a),
    }
}

/// Parse `args` (program name first), run, and map the outcome to an exit
/// status: 0 on success, 1 on a runtime failure, 2 on a usage error.
pub fn main_with_args<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = if matches!(e, crate::error::Error::Usage(_)) { 2 } else { 1 };
            let mut lines = chain(&e).into_iter();
            eprintln!("error: {}", lines.next().unwrap_or_default());
            for cause in lines {
                eprintln!("  caused by: {cause}");
            }
            ExitCode::from(code)
        }
    }
}
