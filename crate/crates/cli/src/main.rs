//! `thermalign`: RGB-thermal calibration, depth-guided alignment, dataset
//! statistics and segmentation evaluation.

mod commands;
mod error;
mod synth_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::LevelFilter;

use error::{CliError, ExitStatus};

#[derive(Debug, Parser)]
#[command(name = "thermalign", version, about = "RGB-thermal calibration, alignment and evaluation toolkit")]
#[command(after_help = "Environment: THERMALIGN_THREADS caps worker threads (0 = all cores).\n\
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate one camera from checkerboard corner observations.
    CalibrateIntrinsics(CalibrateIntrinsicsArgs),
    /// Calibrate the RGB-to-thermal transform from views seen by both cameras.
    CalibrateExtrinsics(CalibrateExtrinsicsArgs),
    /// Warp a thermal image into the RGB frame using a depth image.
    Align(AlignArgs),
    /// Fill zero-valued holes of an aligned 16-bit image by neighbour averaging.
    Fill(FillArgs),
    /// Class-imbalance statistics of a dataset's label images.
    Stats(StatsArgs),
    /// ENet class weights from a dataset's label images.
    Weights(WeightsArgs),
    /// Per-class IoU and mIoU of predicted against ground-truth label images.
    Eval(EvalArgs),
    /// Write synthetic ground-truth data in the pipeline's file formats.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ModelArg {
    PlumbBob,
    Fisheye,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InterpArg {
    Nearest,
    Bilinear,
}

#[derive(Debug, Args)]
pub struct CalibrateIntrinsicsArgs {
    /// Corner observation JSON file.
    #[arg(long)]
    pub corners: PathBuf,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Output calibration JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Image width in pixels, when the corner file does not give it.
    #[arg(long)]
    pub width: Option<usize>,
    /// Image height in pixels, when the corner file does not give it.
    #[arg(long)]
    pub height: Option<usize>,
    /// Print a machine-readable summary to stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateExtrinsicsArgs {
    /// RGB calibration JSON.
    #[arg(long)]
    pub rgb: PathBuf,
    /// Thermal calibration JSON.
    #[arg(long)]
    pub thermal: PathBuf,
    #[arg(long)]
    pub corners_rgb: PathBuf,
    #[arg(long)]
    pub corners_thermal: PathBuf,
    /// Output extrinsics JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated view ids to use; default is every view seen by both cameras.
    #[arg(long, value_delimiter = ',')]
    pub views: Option<Vec<String>>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// 16-bit depth PNG in millimetres, in the undistorted RGB frame.
    #[arg(long)]
    pub depth: PathBuf,
    /// Raw 16-bit thermal PNG.
    #[arg(long)]
    pub thermal: PathBuf,
    #[arg(long)]
    pub rgb_intr: PathBuf,
    #[arg(long)]
    pub th_intr: PathBuf,
    #[arg(long)]
    pub ext: PathBuf,
    /// Aligned 16-bit thermal PNG in the RGB frame (0 = hole).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional 8-bit status map (255 valid, 0 no depth, 128 out of view, 64 occluded).
    #[arg(long)]
    pub status: Option<PathBuf>,
    #[arg(long, default_value_t = thermalign_core::registration::DEFAULT_OCCLUSION_TOL_MM)]
    pub occlusion_tol_mm: f64,
    #[arg(long, value_enum, default_value = "bilinear")]
    pub interp: InterpArg,
    /// Undistorted view: 0 crops to valid pixels, 1 keeps every source pixel.
    #[arg(long, default_value_t = thermalign_core::geometry::DEFAULT_BALANCE)]
    pub balance: f64,
    /// The thermal input is already undistorted.
    #[arg(long)]
    pub no_undistort: bool,
    /// Fill holes after alignment.
    #[arg(long)]
    pub fill: bool,
    #[arg(long, default_value_t = 3)]
    pub max_radius: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct FillArgs {
    /// 16-bit PNG with holes marked 0.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub max_radius: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset root with rgb/, thermal/, depth/ and labels/.
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    #[arg(long)]
    pub root: PathBuf,
    #[arg(long, default_value_t = thermalign_core::dataset::DEFAULT_ENET_C)]
    pub c: f64,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of ground-truth label PNGs.
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory of predicted label PNGs with the same file names.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub classes: usize,
    /// Also write the report as JSON to this file.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// Corner files for both cameras plus the ground-truth calibration.
    CalibViews,
    /// Near and far planes seen by the PST-like rig, in dataset layout.
    OcclusionScene,
    /// Identical distortion-free cameras with identity extrinsics.
    IdentityRig,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Board views for calib-views.
    #[arg(long, default_value_t = 20)]
    pub views: usize,
    /// Corner noise standard deviation in pixels for calib-views.
    #[arg(long, default_value_t = 0.0)]
    pub noise_px: f64,
    #[arg(long)]
    pub json: bool,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("THERMALIGN_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::usage(format!("THERMALIGN_THREADS must be a non-negative integer, got `{value}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot configure {n} threads: {e}")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::CalibrateIntrinsics(a) => commands::calibrate_intrinsics(&a),
        Command::CalibrateExtrinsics(a) => commands::calibrate_extrinsics(&a),
        Command::Align(a) => commands::align(&a),
        Command::Fill(a) => commands::fill(&a),
        Command::Stats(a) => commands::stats(&a),
        Command::Weights(a) => commands::weights(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Synth(a) => synth_cmd::synth(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            let status = if e.use_stderr() { ExitStatus::Usage } else { ExitStatus::Success };
            return ExitCode::from(status.code() as u8);
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).target(env_logger::Target::Stderr).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status.code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn argument_definitions_are_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn align_requires_depth() {
        let err = Cli::try_parse_from([
            "thermalign",
            "align",
            "--thermal",
            "t.png",
            "--rgb-intr",
            "r.json",
            "--th-intr",
            "t.json",
            "--ext",
            "e.json",
            "--out",
            "o.png",
        ])
        .unwrap_err();
        assert!(err.use_stderr());
        assert!(err.to_string().contains("--depth"));
    }
}
