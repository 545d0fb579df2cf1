//! `posthoc`: post hoc bounds on the number of false positives in any selection.

mod commands;
mod input;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use posthoc::TemplateKind;

#[derive(Parser)]
#[command(name = "posthoc", version, about = "Post hoc false positive bounds for data-driven selections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound the false positives in one or more selections.
    Bound(BoundArgs),
    /// Bounds along the p-value level sets (k smallest p-values, k = 1..m).
    Envelope(EnvelopeArgs),
    /// Calibrate lambda for a template by permutation.
    Calibrate(CalibrateArgs),
    /// Segment budgets along chromosomes, optionally aggregated into a tree.
    Spatial(SpatialArgs),
    /// Monte Carlo coverage experiment.
    Simulate(SimulateArgs),
    /// Serve the HTTP API over a calibrated session.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
pub struct InputArgs {
    /// CSV with columns id,p.
    #[arg(long, value_name = "CSV", conflicts_with_all = ["data", "labels"])]
    pub pvalues: Option<PathBuf>,
    /// Two-sample matrix: header of sample ids, first column row ids.
    #[arg(long, value_name = "CSV", requires = "labels")]
    pub data: Option<PathBuf>,
    /// Sample labels: sample_id,group with group 1 or 2.
    #[arg(long, value_name = "CSV", requires = "data")]
    pub labels: Option<PathBuf>,
    /// Per-hypothesis annotations keyed by id in the first column.
    #[arg(long, value_name = "CSV")]
    pub annotations: Option<PathBuf>,
    /// Studentize with per-group variances instead of assuming unit variance.
    #[arg(long)]
    pub welch: bool,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

#[derive(Args, Clone, Default)]
pub struct SelectArgs {
    /// Named selection NAME=EXPR, EXPR being terms joined by '&':
    /// all, top:K, bh:Q, fc>X, fc<X, p<X, ids:a,b, idx:1,2. Repeatable.
    #[arg(long = "select", value_name = "NAME=EXPR")]
    pub select: Vec<String>,
    /// Keep the K smallest p-values.
    #[arg(long, value_name = "K")]
    pub select_top: Option<usize>,
    /// Keep log fold change > X.
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    pub fc_above: Option<f64>,
    /// Keep log fold change < X.
    #[arg(long, value_name = "X", allow_hyphen_values = true)]
    pub fc_below: Option<f64>,
    /// Keep the BH step-up rejections at level Q (a selection rule only).
    #[arg(long, value_name = "Q")]
    pub bh_level: Option<f64>,
    /// Comma-separated identifiers.
    #[arg(long, value_name = "ID,..")]
    pub ids: Option<String>,
    /// Comma-separated 1-based positions.
    #[arg(long, value_name = "I,..")]
    pub indices: Option<String>,
}

#[derive(Args, Clone)]
pub struct CalibrationArgs {
    /// Template for calibrated methods.
    #[arg(long, value_parser = parse_template)]
    pub template: Option<TemplateKind>,
    /// Number of template curves (default m).
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Number of permutations, identity included.
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Clone, Default)]
pub struct OutArgs {
    /// Write the JSON report here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// simes, bonf[:k0], calibrated[:linear|beta]
    #[arg(long, default_value = "simes")]
    pub method: String,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "simes")]
    pub method: String,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    /// Also write the envelope as CSV.
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub calibration: CalibrationArgs,
    #[command(flatten)]
    pub select: SelectArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Clone, Default)]
pub struct SpatialOpts {
    /// Hypotheses per segment.
    #[arg(long, value_name = "S")]
    pub segment_size: Option<usize>,
    /// Annotation column holding the chromosome (rows must be sorted by position).
    #[arg(long, value_name = "NAME")]
    pub chrom_col: Option<String>,
    /// markov[:t] (t defaults to level^2), dkw or perm-beta.
    #[arg(long, default_value = "dkw")]
    pub budget: String,
    /// Aggregate neighbouring segments into a binary tree.
    #[arg(long)]
    pub tree: bool,
}

#[derive(Args)]
pub struct SpatialArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub spatial: SpatialOpts,
    #[command(flatten)]
    pub select: SelectArgs,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// full_null_iid, two_sample_gaussian or equicorrelated_pairs.
    #[arg(long, default_value = "full_null_iid")]
    pub scenario: String,
    /// bonf, simes, threshold, calibrated, markov, dkw, perm-beta, spatial or selection-effect.
    #[arg(long, default_value = "simes")]
    pub method: String,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 50)]
    pub n1: usize,
    #[arg(long, default_value_t = 50)]
    pub n2: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Share of alternatives in the two-sample scenario (the last rows).
    #[arg(long, default_value_t = 0.5)]
    pub alt_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1)]
    pub k0: usize,
    /// Selection size for the selection-effect method.
    #[arg(long, default_value_t = 10)]
    pub s0: usize,
    /// Fixed lambda for the threshold method (default alpha).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_parser = parse_template, default_value = "linear")]
    pub template: TemplateKind,
    /// Markov threshold t for the markov method.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long = "B", default_value_t = 100)]
    pub b: usize,
    #[command(flatten)]
    pub spatial: SpatialOpts,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Templates to calibrate at startup; repeatable (default: linear and beta for two-sample input).
    #[arg(long = "template", value_parser = parse_template)]
    pub templates: Vec<TemplateKind>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long = "B", default_value_t = 1000)]
    pub b: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub spatial: SpatialOpts,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of UI assets served for non-API paths.
    #[arg(long, value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
}

fn parse_template(s: &str) -> Result<TemplateKind, String> {
    s.parse().map_err(|e: posthoc::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bound(a) => commands::bound(a),
        Command::Envelope(a) => commands::envelope(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Spatial(a) => commands::spatial(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
