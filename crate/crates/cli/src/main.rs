//! `featurenull`: train a null model of image features, score and map
//! images against it, and compare groups of images.

// `!(x > y)` is deliberate in range checks: it rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::Overrides;
use crate::exit::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "featurenull",
    version,
    about = "Null model of scientific-image features"
)]
pub struct Cli {
    /// Worker threads (default: logical cores)
    #[arg(long, global = true, env = "FEATURENULL_THREADS")]
    pub threads: Option<usize>,

    /// TOML file pre-populating the run configuration; flags win
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// More logging on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract, cluster and fit a null model from a directory of images
    Train(TrainArgs),
    /// Mean log probability of an image under a model
    Score(ScoreArgs),
    /// Render a per-pixel log-probability heatmap
    Heatmap(HeatmapArgs),
    /// Per-group mean log probability and pairwise Welch p-values
    Compare(CompareArgs),
    /// Correlate Hamming distance with reduced-vector distance
    ValidateReduction(ValidateArgs),
    /// Summarise a model file
    Inspect(InspectArgs),
    /// Write the corpus manifest without training
    Scan(ScanArgs),
    /// List the top keypoints of one image
    Keypoints(KeypointsArgs),
    /// Generate synthetic texture, blob or text images
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory, searched recursively
    pub corpus: PathBuf,
    /// Model file to write
    #[arg(short, long)]
    pub output: PathBuf,
    /// Cluster weight CSV [default: <output>.weights.csv]
    #[arg(long)]
    pub weights_csv: Option<PathBuf>,
    /// Also write the corpus manifest as JSON lines
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    /// Grid spacing in pixels [default: 3]
    #[arg(long)]
    pub stride: Option<usize>,
    /// Ignore large pure-black regions
    #[arg(long)]
    pub auto_mask: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    pub model: PathBuf,
    pub image: PathBuf,
    /// Write grid values as CSV (x,y,ln_p)
    #[arg(long, value_name = "FILE")]
    pub per_point: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    pub model: PathBuf,
    pub image: PathBuf,
    /// PNG to write
    #[arg(short, long)]
    pub output: PathBuf,
    /// Colour range lo:hi in ln p [default: 5th to 95th percentile]
    #[arg(long, allow_hyphen_values = true, value_parser = parse_range)]
    pub range: Option<(f64, f64)>,
    /// Blend the colours over the source image
    #[arg(long)]
    pub overlay: bool,
    /// Also write the grid as raw little-endian f64
    #[arg(long, value_name = "FILE")]
    pub raw: Option<PathBuf>,
    /// Also write the grid as CSV
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub model: PathBuf,
    /// One directory per group
    #[arg(required = true)]
    pub groups: Vec<PathBuf>,
    /// CSV destination [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Pairs per Hamming distance
    #[arg(long, default_value_t = 20_000)]
    pub pairs: usize,
    /// Largest Hamming distance
    #[arg(long, default_value_t = 30)]
    pub dmax: u32,
    #[arg(long, default_value_t = featurenull::pipeline::DEFAULT_SEED)]
    pub seed: u64,
    /// Per-distance summary CSV
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub model: PathBuf,
    /// Number of heaviest clusters to list
    #[arg(long, default_value_t = 10)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    pub corpus: PathBuf,
    /// Manifest destination [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct KeypointsArgs {
    pub image: PathBuf,
    /// CSV destination [default: stdout]
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    Texture,
    Blob,
    Text,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory, created if missing
    pub dir: PathBuf,
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Square image side in pixels
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    /// Image i uses seed + i
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|e| format!("bad lower bound {lo:?}: {e}"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|e| format!("bad upper bound {hi:?}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite()) {
        return Err("range bounds must be finite".into());
    }
    if hi <= lo {
        return Err(format!("range needs lo < hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn init_threads(threads: Option<usize>) -> Result<(), Failure> {
    match threads {
        Some(0) => Err(Failure::usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot start {n} threads: {e}"))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = init_threads(cli.threads).and_then(|()| commands::run(&cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code()
        }
    }
}
