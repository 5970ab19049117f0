mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use remnet_core::NormMode;

use config::RunConfig;

/// UWB range-error mitigation: data conversion, training, int8 deployment
/// and benchmarking. Every command prints one JSON record per line.
#[derive(Debug, Parser)]
#[command(name = "remnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a raw CIR export (or synthesize a campaign) to canonical CSV.
    Convert(ConvertArgs),
    /// Train REMNet (or the MLP baseline) for one or more seeds.
    Train(TrainArgs),
    /// Train, optimize and quantize per CIR length; report float, optimized
    /// and int8 accuracy plus image sizes.
    Pipeline(PipelineArgs),
    /// Quantize trained weights into an int8 model image.
    Quantize(QuantizeArgs),
    /// Emit a model image as embeddable C source.
    Export(ExportArgs),
    /// Measure int8 inference latency and energy per inference.
    Bench(BenchArgs),
    /// PCA projection of the dataset and residual box-plot data.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Norm {
    MaxAbs,
    Energy,
}

impl From<Norm> for NormMode {
    fn from(n: Norm) -> Self {
        match n {
            Norm::MaxAbs => NormMode::MaxAbs,
            Norm::Energy => NormMode::Energy,
        }
    }
}

#[derive(Debug, Args)]
struct ConvertArgs {
    /// Raw export to convert.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    input: Option<PathBuf>,
    /// Generate a synthetic campaign instead; 1.0 matches the real
    /// campaign's per-environment sample counts.
    #[arg(long, value_name = "SCALE")]
    synthetic: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    /// Canonical CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Canonical CSV dataset.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// CIR lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    cir_len: Option<Vec<usize>>,
    /// Number of training seeds (0..N).
    #[arg(long)]
    seeds: Option<usize>,
    /// Use the reference layout (bias-free 7-tap stem and 1x1 shortcuts).
    #[arg(long)]
    reference_layout: bool,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_enum)]
    norm: Option<Norm>,
    #[arg(long)]
    calibration_samples: Option<usize>,
    /// Output directory for weights and reports.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn to_config(&self, default_lens: &[usize]) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            dataset: self.dataset.clone(),
            cir_len: self.cir_len.clone(),
            reference_layout: self.reference_layout.then_some(true),
            dropout_rate: self.dropout,
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            seeds: self.seeds,
            norm: self.norm.map(Into::into),
            calibration_samples: self.calibration_samples,
            out: self.out.clone(),
        };
        file.merge(flags).resolved(default_lens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Arch {
    Remnet,
    Mlp,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value_t = Arch::Remnet)]
    arch: Arch,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Add the MLP baseline row (full CIR window).
    #[arg(long)]
    with_mlp: bool,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    /// Trained weights (JSON written by `train`).
    #[arg(long)]
    weights: PathBuf,
    /// Dataset providing the calibration (training split) and test samples.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Norm::MaxAbs)]
    norm: Norm,
    #[arg(long, default_value_t = remnet_core::quant::DEFAULT_CALIBRATION_SAMPLES)]
    calibration_samples: usize,
    /// int8 model image to write.
    #[arg(long)]
    out: PathBuf,
    /// Also write the optimized float32 image here.
    #[arg(long)]
    float_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    image: PathBuf,
    /// C source file to write.
    #[arg(long)]
    out: PathBuf,
    /// Prefix of the emitted `<prefix>_data` and `<prefix>_len` symbols.
    #[arg(long, default_value = "remnet_model")]
    symbol: String,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// int8 model images; one record per image.
    #[arg(long, required = true)]
    image: Vec<PathBuf>,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Supply voltage in volts.
    #[arg(long)]
    vcc: Option<f64>,
    /// Absorbed current in milliamps.
    #[arg(long)]
    iabs: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for the projection and box-plot files.
    #[arg(long)]
    out: PathBuf,
    /// Trained weights to evaluate for residual box plots.
    #[arg(long)]
    weights: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Norm::MaxAbs)]
    norm: Norm,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Convert(a) => commands::convert(&a),
        Command::Train(a) => commands::train(&a),
        Command::Pipeline(a) => commands::pipeline(&a),
        Command::Quantize(a) => commands::quantize(&a),
        Command::Export(a) => commands::export(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Analyze(a) => commands::analyze(&a),
    }
}
