//! Command line surface of the `tofu` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tofu_nn::{FusionKind, Placement};

#[derive(Debug, Parser)]
#[command(
    name = "tofu",
    version,
    about = "Indirect time-of-flight simulation, reconstruction and fusion"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render scenes and write a raw correlation dataset.
    Simulate(SimulateArgs),
    /// Recover depth classically from stored correlation frames.
    Reconstruct(ReconstructArgs),
    /// Train the fusion network on a dataset.
    Train(TrainArgs),
    /// Depth metrics for a checkpoint or a reconstruction run.
    Eval(EvalArgs),
    /// Run one frame through a trained network.
    Infer(InferArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Raw phase depth, wrap count fixed to zero.
    Wrapped,
    /// Single frequency with a constant wrap count (`--fixed-n`).
    FixedN,
    /// Two-frequency consistency search.
    DualFreq,
    /// Per-pixel wrap counts taken from the ground truth.
    OracleN,
}

impl MethodArg {
    pub fn token(self) -> &'static str {
        match self {
            MethodArg::Wrapped => "wrapped",
            MethodArg::FixedN => "fixed-n",
            MethodArg::DualFreq => "dual-freq",
            MethodArg::OracleN => "oracle-n",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    None,
    Bottleneck,
    All,
}

impl PlacementArg {
    pub fn to_placement(self) -> Placement {
        match self {
            PlacementArg::None => Placement::None,
            PlacementArg::Bottleneck => Placement::Bottleneck,
            PlacementArg::All => Placement::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Gated,
    Attention,
}

impl KindArg {
    pub fn to_kind(self) -> FusionKind {
        match self {
            KindArg::Gated => FusionKind::Gated,
            KindArg::Attention => FusionKind::Attention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    All,
}

/// `LO,HI` pair for `--range-clip`.
pub fn parse_range_clip(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err("expected LO,HI".into());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| "bad LO value")?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| "bad HI value")?;
    Ok((lo, hi))
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of frames to generate.
    #[arg(long, default_value_t = 200)]
    pub count: u32,
    /// Explicit scene JSON used for every frame. Without it a fresh layout
    /// is generated per frame; the file also supplies extent, depth range
    /// and calibration.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Frame width in pixels (generated scenes).
    #[arg(long, default_value_t = 64)]
    pub width: u32,
    /// Frame height in pixels (generated scenes).
    #[arg(long, default_value_t = 64)]
    pub height: u32,
    /// Working depth range lower bound, metres (generated scenes).
    #[arg(long, default_value_t = 0.5)]
    pub d_min: f64,
    /// Working depth range upper bound, metres (generated scenes).
    #[arg(long, default_value_t = 15.0)]
    pub d_max: f64,
    /// Modulation frequency in Hz; repeat the flag for a dual-frequency
    /// dataset (at most twice). Defaults to 20 MHz.
    #[arg(long = "freq-hz", value_name = "HZ")]
    pub freq_hz: Vec<f64>,
    /// Std-dev of additive Gaussian read noise, sensor units.
    #[arg(long, default_value_t = 0.0)]
    pub noise_sigma: f64,
    /// Shot-noise scale; 0 disables the signal-dependent term.
    #[arg(long, default_value_t = 0.0)]
    pub shot_scale: f64,
    /// Per-pixel dropout probability.
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    /// Quantize stored correlations to 8 bits.
    #[arg(long, default_value_t = false)]
    pub quantize8: bool,
    /// Emitter amplitude before albedo and falloff.
    #[arg(long, default_value_t = 100.0)]
    pub source_amplitude: f64,
    /// Every k-th frame is tagged as validation.
    #[arg(long, default_value_t = 5)]
    pub val_every: u32,
    /// Master seed. Outputs are a pure function of flags and this value.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    /// Dataset directory produced by `tofu simulate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for per-frame depth and metrics.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Wrapped)]
    pub method: MethodArg,
    /// Wrap count applied by `fixed-n`.
    #[arg(long, default_value_t = 0)]
    pub fixed_n: u32,
    /// Dual-frequency consistency gate, metres.
    #[arg(long, default_value_t = 0.25)]
    pub residual_max: f64,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Dataset directory produced by `tofu simulate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the checkpoint and the loss curve.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PlacementArg::Bottleneck)]
    pub placement: PlacementArg,
    #[arg(long, value_enum, default_value_t = KindArg::Gated)]
    pub fusion_kind: KindArg,
    #[arg(long, default_value_t = 1)]
    pub epochs: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Base Adam learning rate.
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Weight of the edge-aware smoothness term.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_s: f64,
    /// Network output range lower bound, metres.
    #[arg(long, default_value_t = 0.1)]
    pub d_min: f64,
    /// Network output range upper bound, metres.
    #[arg(long, default_value_t = 15.0)]
    pub d_max: f64,
    /// Dual-frequency consistency gate for the input stack, metres.
    #[arg(long, default_value_t = 0.25)]
    pub residual_max: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Dataset directory produced by `tofu simulate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Trained checkpoint to evaluate.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Reconstruction directory to evaluate instead of a checkpoint.
    #[arg(long)]
    pub recon: Option<PathBuf>,
    /// Train every placement/kind variant with an identical budget and
    /// seed, then evaluate each. Requires `--out` (a directory).
    #[arg(long, default_value_t = false)]
    pub sweep: bool,
    #[arg(long, value_enum, default_value_t = SplitArg::Val)]
    pub split: SplitArg,
    /// Restrict metrics to ground truth inside LO,HI metres (inclusive).
    #[arg(long, value_parser = parse_range_clip, value_name = "LO,HI")]
    pub range_clip: Option<(f64, f64)>,
    /// CSV destination: a file, or the sweep working directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dual-frequency consistency gate for the input stack, metres.
    #[arg(long, default_value_t = 0.25)]
    pub residual_max: f64,
    // Sweep training knobs; ignored without --sweep.
    #[arg(long, default_value_t = 1)]
    pub epochs: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda_s: f64,
    #[arg(long, default_value_t = 0.1)]
    pub d_min: f64,
    #[arg(long, default_value_t = 15.0)]
    pub d_max: f64,
}

#[derive(Debug, Clone, Args)]
pub struct InferArgs {
    /// Trained checkpoint.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Correlation capture (TOFC).
    #[arg(long)]
    pub corr: PathBuf,
    /// Second-frequency capture for dual-frequency stacks.
    #[arg(long)]
    pub corr2: Option<PathBuf>,
    /// Color image on the RGB camera grid (PFM).
    #[arg(long)]
    pub rgb: PathBuf,
    /// Rig calibration JSON.
    #[arg(long)]
    pub calib: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the input stack and per-scale predictions.
    #[arg(long, default_value_t = false)]
    pub intermediates: bool,
    /// Dual-frequency consistency gate, metres.
    #[arg(long, default_value_t = 0.25)]
    pub residual_max: f64,
}
