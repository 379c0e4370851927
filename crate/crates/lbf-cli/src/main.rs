//! `lbf` — subspace clustering from the command line.
//!
//! Subcommands: `cluster` (label a point file), `bench` (synthetic benchmark
//! suites), `modelsel` (pick the number of clusters), `generate` (synthetic
//! data sets), `scalemap` (per-point neighborhood sizes).
//!
//! Exit codes: 0 on success, 1 for I/O or parse failures, 2 for invalid
//! configuration. `LBF_THREADS` caps worker parallelism (default: all cores).

mod commands;
mod record;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lbf::FlatKind;

#[derive(Parser)]
#[command(
    name = "lbf",
    version,
    about = "Hybrid-linear clustering with local best-fit flats"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a point file and write labels plus a run record
    Cluster(ClusterArgs),
    /// Run a synthetic benchmark suite and report error and timing
    Bench(BenchArgs),
    /// Estimate the number of clusters from the elbow of the energy curve
    Modelsel(ModelselArgs),
    /// Generate a synthetic hybrid-linear data set
    Generate(GenerateArgs),
    /// Report the selected neighborhood size at every point
    Scalemap(ScalemapArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Affine,
    Linear,
}

impl From<KindArg> for FlatKind {
    fn from(k: KindArg) -> FlatKind {
        match k {
            KindArg::Affine => FlatKind::Affine,
            KindArg::Linear => FlatKind::Linear,
        }
    }
}

/// Flags shared by every command that runs a scale scan.
#[derive(Args)]
struct ScaleArgs {
    /// First neighborhood size tried (default: smallest size with residual)
    #[arg(long)]
    start: Option<usize>,
    /// Increment between neighborhood sizes
    #[arg(long, default_value_t = 2)]
    step: usize,
    /// Largest neighborhood size examined (default: the whole cloud)
    #[arg(long)]
    max_size: Option<usize>,
    /// Mean-shift the seed first: NEIGHBORS,ITERS
    #[arg(long, value_name = "N,I")]
    mean_shift: Option<String>,
    /// Accept the first scale when the score rises immediately after it
    #[arg(long)]
    first_scale_min: bool,
}

#[derive(Args)]
struct ClusterArgs {
    /// Point file: delimited text or LBF1 binary
    input: PathBuf,
    /// Dimension of the flats
    #[arg(long)]
    dim: usize,
    /// Number of clusters
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Affine)]
    kind: KindArg,
    /// Candidate flats sampled (default: 70 per cluster)
    #[arg(long)]
    candidates: Option<usize>,
    /// Greedy replacement passes (default: 3 per cluster)
    #[arg(long)]
    passes: Option<usize>,
    #[command(flatten)]
    scale: ScaleArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ground-truth labels: report the misclassification rate against them
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Where to write per-point output (default: INPUT.labels)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Layout of the per-point output
    #[arg(long, value_enum, default_value_t = OutFormat::Labels)]
    format: OutFormat,
    /// Where to write the JSON run record (default: INPUT.run.json)
    #[arg(long)]
    record: Option<PathBuf>,
    /// Field separator for text input ("ws" = any whitespace)
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// Drop wall-clock data from the record so reruns are byte-identical
    #[arg(long)]
    omit_runtime: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    /// One label per line
    Labels,
    /// label,distance rows
    Csv,
    /// JSON lines: summary, then one object per point
    Jsonl,
}

#[derive(Args)]
struct BenchArgs {
    /// Flat kind of the suite
    #[arg(long, value_enum)]
    suite: KindArg,
    /// Named arrangement, e.g. 2^2inR4 (two 2-flats in R^4)
    #[arg(long)]
    setting: String,
    /// Outlier percentage of the final data set
    #[arg(long, default_value_t = 5)]
    outliers: u32,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Samples per subspace
    #[arg(long, default_value_t = 250)]
    samples: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a JSON run record here
    #[arg(long)]
    json: Option<PathBuf>,
    /// Drop wall-clock data from table and record so reruns are byte-identical
    #[arg(long)]
    omit_runtime: bool,
}

#[derive(Args)]
struct ModelselArgs {
    /// Point file: delimited text or LBF1 binary
    input: PathBuf,
    /// Dimension of the flats
    #[arg(long)]
    dim: usize,
    /// Largest cluster count examined
    #[arg(long)]
    kmax: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Affine)]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a JSON run record here
    #[arg(long)]
    json: Option<PathBuf>,
    /// Field separator for text input ("ws" = any whitespace)
    #[arg(long, default_value = ",")]
    delimiter: String,
    /// Drop wall-clock data from the record so reruns are byte-identical
    #[arg(long)]
    omit_runtime: bool,
}

#[derive(Args)]
struct GenerateArgs {
    /// Subspace dimensions, comma separated, e.g. 2,2,3
    #[arg(long)]
    dims: String,
    /// Ambient dimension
    #[arg(long)]
    ambient: usize,
    #[arg(long, default_value_t = 250)]
    samples: usize,
    /// Noise standard deviation
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Outlier fraction in [0,1)
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    /// How the fraction converts to a count
    #[arg(long, value_enum, default_value_t = OutlierRuleArg::Inliers)]
    outlier_rule: OutlierRuleArg,
    #[arg(long, value_enum, default_value_t = KindArg::Affine)]
    kind: KindArg,
    /// Reject draws until every pair of subspaces meets this angle (radians)
    #[arg(long)]
    min_angle: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes PREFIX.csv (or .bin), PREFIX.labels, PREFIX.spec.json
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = MatrixFormat::Text)]
    format: MatrixFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutlierRuleArg {
    /// Outliers are a fraction of the inlier count
    Inliers,
    /// Outliers are a fraction of the final data set
    Final,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixFormat {
    /// Comma-separated text
    Text,
    /// LBF1 binary, bit-exact round trip
    Binary,
}

#[derive(Args)]
struct ScalemapArgs {
    /// Point file: delimited text or LBF1 binary
    input: PathBuf,
    /// Dimension of the flats
    #[arg(long)]
    dim: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Affine)]
    kind: KindArg,
    #[command(flatten)]
    scale: ScaleArgs,
    /// Output path (default: stdout); rows are point coordinates + size
    #[arg(long)]
    out: Option<PathBuf>,
    /// Field separator for text input ("ws" = any whitespace)
    #[arg(long, default_value = ",")]
    delimiter: String,
}

/// Anything that can stop a command, tagged with the exit code it deserves.
#[derive(Debug)]
pub enum AppError {
    Lib(lbf::Error),
    Usage(String),
    File(PathBuf, std::io::Error),
}

impl AppError {
    fn file(path: &Path, e: std::io::Error) -> AppError {
        AppError::File(path.to_path_buf(), e)
    }

    fn exit_code(&self) -> i32 {
        match self {
            AppError::Lib(e) if e.is_config() => 2,
            AppError::Lib(_) => 1,
            AppError::Usage(_) => 2,
            AppError::File(..) => 1,
        }
    }
}

impl From<lbf::Error> for AppError {
    fn from(e: lbf::Error) -> AppError {
        AppError::Lib(e)
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Lib(e) => write!(f, "{e}"),
            AppError::Usage(m) => write!(f, "{m}"),
            AppError::File(path, e) => write!(f, "{}: {e}", path.display()),
        }
    }
}

fn init_thread_pool() {
    if let Ok(v) = std::env::var("LBF_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .is_err()
                {
                    eprintln!("warning: thread pool already initialized; LBF_THREADS ignored");
                }
            }
            _ => eprintln!("warning: ignoring LBF_THREADS={v:?} (want a positive integer)"),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    init_thread_pool();
    let result = match cli.command {
        Command::Cluster(args) => commands::cluster(args),
        Command::Bench(args) => commands::bench(args),
        Command::Modelsel(args) => commands::modelsel(args),
        Command::Generate(args) => commands::generate(args),
        Command::Scalemap(args) => commands::scalemap(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
