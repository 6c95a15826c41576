//! `aperture` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 I/O failure, 4 not
//! enough usable images.

pub mod config;
pub mod curves;
pub mod dataset;
pub mod refine;
pub mod report;
pub mod simulate;
pub mod variance;

use std::io;
use std::path::{Path, PathBuf};

use aperture_core::refine::SpacePreset;
use aperture_core::{ImagingError, Interpolation, RefineError, StrategyKind};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Insufficient(String),
}

impl CliError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn imaging(path: &Path, e: ImagingError) -> Self {
        match e {
            ImagingError::Io(source) => CliError::io(path, source),
            other => CliError::Config(format!("{}: {other}", path.display())),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Insufficient(_) => 4,
        }
    }
}

impl From<RefineError> for CliError {
    fn from(e: RefineError) -> Self {
        match e {
            RefineError::NoImages | RefineError::NonFiniteObjective(_) => CliError::Insufficient(e.to_string()),
            RefineError::Imaging(ImagingError::InsufficientPixels { .. }) => CliError::Insufficient(e.to_string()),
            RefineError::Imaging(ImagingError::Io(source)) => CliError::Io {
                path: PathBuf::new(),
                source,
            },
            other => CliError::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "aperture",
    version,
    about = "Synthetic-aperture integration with pose refinement"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic dataset from a TOML config.
    Simulate(SimulateArgs),
    /// Refine view poses and write the integral image and a run report.
    Refine(RefineArgs),
    /// Compare the closed-form occlusion variance with a Monte-Carlo run.
    VarianceModel(VarianceArgs),
    /// Tabulate image-plane error against each pose parameter error.
    PoseErrorCurves(CurveArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML config; an empty file gives the default benchmark.
    pub config: PathBuf,
    /// Output dataset directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Dataset directory holding `manifest.json`.
    pub dataset: PathBuf,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value = "three")]
    pub space: SpacePreset,
    #[arg(long, default_value = "early")]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = 1)]
    pub patience: usize,
    /// Resampling used when warping views: bicubic, bilinear or nearest.
    #[arg(long, default_value = "bicubic")]
    pub interpolation: Interpolation,
    /// Region of interest on the focal plane raster: x,y,w,h in samples.
    #[arg(long, value_parser = parse_roi)]
    pub roi: Option<[usize; 4]>,
    /// Height of a horizontal focal plane, meters.
    #[arg(long, conflicts_with = "auto_plane", allow_hyphen_values = true)]
    pub plane_z: Option<f64>,
    /// Search the focal plane height (and tilt with --plane-tilt) first.
    #[arg(long)]
    pub auto_plane: bool,
    #[arg(long, requires = "auto_plane")]
    pub plane_tilt: bool,
    /// Height range for --auto-plane: lo,hi in meters.
    #[arg(long, value_parser = parse_pair, default_value = "-5,5", allow_hyphen_values = true)]
    pub z_range: (f64, f64),
    #[arg(long, default_value_t = 21)]
    pub z_steps: usize,
    /// Pose record file to start from instead of the dataset's initial poses.
    #[arg(long)]
    pub poses: Option<PathBuf>,
    /// Record wall-clock phase timings in the report.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Args)]
pub struct VarianceArgs {
    /// Occlusion probability.
    #[arg(long = "d", default_value_t = 0.5)]
    pub d: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu_o: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2_o: f64,
    #[arg(long, default_value_t = 10.0)]
    pub mu_s: f64,
    #[arg(long, default_value_t = 4.0)]
    pub sigma2_s: f64,
    /// Number of integrated views.
    #[arg(short = 'n', long = "n", default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub mc_pixels: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Camera altitude, meters.
    #[arg(long, default_value_t = 30.0)]
    pub tz: f64,
    /// Focal length, pixels.
    #[arg(long, default_value_t = 1000.0)]
    pub f: f64,
    /// Image width and height, pixels.
    #[arg(long, default_value_t = 1024)]
    pub size: usize,
    /// Output CSV file; standard output when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

fn parse_roi(s: &str) -> Result<[usize; 4], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected x,y,w,h".to_string())
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected lo,hi")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate::run(&a),
        Command::Refine(a) => refine::run(&a).map(|_| ()),
        Command::VarianceModel(a) => variance::run(&a, &mut io::stdout().lock()),
        Command::PoseErrorCurves(a) => curves::run(&a),
    }
}
