//! `repscape`: batch front end for the representativeness workflows and
//! experiments. Structured output goes to files; stdout carries the
//! headline numbers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use repscape_core::{
    ErrorClass, FilterPredicate, HistogramKind, MemberPick, ScoreMode, SweepAxis,
};

mod commands;
mod output;

#[derive(Parser, Debug)]
#[command(name = "repscape", version, about = "Representativeness of sample sites over geospatial grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a given sample set (heat map + scalar R).
    Representativeness(RepresentativenessArgs),
    /// Select ideal sites with the windowed histogram-mode algorithm.
    Ideal(IdealArgs),
    /// Random-sampling baseline and percentile placement of R values.
    Baseline(BaselineArgs),
    /// Given vs ideal vs random under one scoring mode.
    Compare(CompareArgs),
    /// R against the number of sites or the number of bins.
    Sweep(SweepArgs),
    /// Write a synthetic Gaussian-mixture dataset.
    Synth(SynthArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Dataset CSV (`region_id,lat,lon,<variables...>`).
    #[arg(long)]
    data: PathBuf,
    /// Variables to analyze (default: all).
    #[arg(long, value_delimiter = ',')]
    variables: Vec<String>,
    /// Inclusive range filters `var:lo..hi`, comma separated, all must hold.
    #[arg(long = "filter", value_delimiter = ',')]
    filters: Vec<FilterPredicate>,
}

#[derive(Args, Debug, Clone)]
struct ScoringArgs {
    /// Scoring mode: heat-scale or window-coverage.
    #[arg(long)]
    mode: Option<ScoreMode>,
    /// Number of color buckets.
    #[arg(long, default_value_t = 10)]
    colors: usize,
    /// Histogram bins (window-coverage scoring and selection).
    #[arg(long)]
    bins: Option<usize>,
    /// Bins per window.
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// Histogram kind: equal-width or equal-frequency.
    #[arg(long, default_value = "equal-width")]
    kind: HistogramKind,
}

#[derive(Args, Debug)]
struct RepresentativenessArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Sample sites CSV (`region_id[,lat,lon,<values...>]`).
    #[arg(long)]
    samples: PathBuf,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Report JSON output.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Heat-map document JSON output.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    /// Raster preview (binary PPM).
    #[arg(long)]
    ppm: Option<PathBuf>,
    #[arg(long, default_value = "720x360", value_parser = parse_size)]
    ppm_size: (usize, usize),
    /// Fitted projection model JSON output.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IdealArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of sites to select.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw each centroid at random from its bucket or take the median.
    #[arg(long, default_value = "random", value_parser = parse_pick)]
    pick: MemberPick,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Centroid CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full result JSON (selection, histogram, report).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    heatmap: Option<PathBuf>,
    #[arg(long)]
    ppm: Option<PathBuf>,
    #[arg(long, default_value = "720x360", value_parser = parse_size)]
    ppm_size: (usize, usize),
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// R values to place among the trials.
    #[arg(long = "r", value_delimiter = ',', allow_negative_numbers = true)]
    supplied: Vec<f64>,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Baseline JSON output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Given sample sites; also sets the default site count.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "random", value_parser = parse_pick)]
    pick: MemberPick,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    /// centroids or bins.
    #[arg(long)]
    axis: SweepAxis,
    /// Values along the axis, strictly ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<usize>,
    /// Site count (bins axis).
    #[arg(long)]
    n: Option<usize>,
    /// Window sizes (bins axis; the centroids axis uses --window).
    #[arg(long, value_delimiter = ',')]
    windows: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "random", value_parser = parse_pick)]
    pick: MemberPick,
    /// Given sample sites, scored at every point.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[command(flatten)]
    scoring: ScoringArgs,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// clustered or unimodal.
    #[arg(long, default_value = "clustered")]
    preset: String,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Component label per row (`region_id,component`).
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, env = "REPSCAPE_PORT", default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let w: usize = w.parse().map_err(|_| "bad width")?;
    let h: usize = h.parse().map_err(|_| "bad height")?;
    if w == 0 || h == 0 {
        return Err("size must be positive".into());
    }
    Ok((w, h))
}

fn parse_pick(s: &str) -> Result<MemberPick, String> {
    match s {
        "random" => Ok(MemberPick::Random),
        "median" => Ok(MemberPick::Median),
        _ => Err(format!("unknown pick `{s}` (random or median)")),
    }
}

/// Bad flag combinations found after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<repscape_core::Error>().map(|e| e.class()) {
        Some(ErrorClass::Usage) => 2,
        Some(ErrorClass::Computation) => 4,
        // unreadable files and malformed content alike
        _ => 3,
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Representativeness(a) => commands::representativeness(a),
        Command::Ideal(a) => commands::ideal(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Compare(a) => commands::compare(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Synth(a) => commands::synth(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
