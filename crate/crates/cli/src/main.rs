//! `slut`: build, refine, inspect and sample adaptive simplex lookup tables.
//!
//! Exit codes: 0 success, 2 partial result (refinement did not converge),
//! 1 runtime error, 64 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};
use slut_core::montecarlo::SamplingMode;
use slut_core::refine::{MetricKind, Probes, SizingKind, SplitRule};

const EXIT_PARTIAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Invalid or conflicting options, reported with exit code 64.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "slut", version, about = "Adaptive simplex lookup tables", propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// key=value file of options for this command; flags given on the
    /// command line take precedence.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory receiving every output file.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
    /// Worker threads (default: logical cores).
    #[arg(long, env = "SLUT_WORKERS")]
    pub workers: Option<usize>,
    /// Seed for every random choice of the command.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Analytic model: imh-like, reh-like, affine[:DIM], constant[:VALUE[:DIM]].
    #[arg(long, default_value = "imh-like")]
    pub model: String,
    /// Busy-wait added to every model evaluation, in microseconds.
    #[arg(long, default_value_t = 0)]
    pub latency_us: u64,
}

#[derive(Args, Debug, Clone)]
pub struct MetricArgs {
    /// Error measure: relative, absolute or min-rel-abs.
    #[arg(long, default_value = "min-rel-abs")]
    pub metric: MetricKind,
    /// Error a simplex barycenter must meet.
    #[arg(long, default_value_t = 0.05)]
    pub threshold: f64,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Sample a model on a regular grid and write it as NRRD.
    #[command(args_override_self = true)]
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Samples per axis, e.g. `9` (every axis) or `9,9,17`.
        #[arg(long, default_value = "9")]
        sizes: String,
        /// Box `lo:hi,lo:hi,...` inside the model domain (default: the domain).
        #[arg(long = "box")]
        bounds: Option<String>,
        /// Output path (default: OUT_DIR/grid.nrrd).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Triangulate an NRRD grid into a LUT, optionally adapting it to a
    /// sizing function of the grid values.
    #[command(args_override_self = true)]
    Tessellate {
        #[command(flatten)]
        common: Common,
        /// Input NRRD grid.
        #[arg(long)]
        grid: PathBuf,
        /// Sizing function driving splits of the initial mesh.
        #[arg(long)]
        sizing: Option<SizingKind>,
        /// Sizing limit (default: 0.05 for sf1, 0.5 for sf2).
        #[arg(long, requires = "sizing")]
        weight_limit: Option<f64>,
        /// Maximum sizing passes.
        #[arg(long, default_value_t = 10)]
        max_passes: usize,
        /// How violating simplices are split.
        #[arg(long, default_value = "midpoint-error")]
        split_rule: SplitRule,
        /// Also write OUT_DIR/mesh.vtk.
        #[arg(long)]
        vtk: bool,
    },
    /// Refine a table until every simplex meets the error threshold.
    #[command(args_override_self = true)]
    Refine {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Start from this LUT.
        #[arg(long, conflicts_with_all = ["grid", "sizes"])]
        lut: Option<PathBuf>,
        /// Start from the Kuhn triangulation of this NRRD grid.
        #[arg(long, conflicts_with = "sizes")]
        grid: Option<PathBuf>,
        /// Start from a fresh grid with these samples per axis (default 9).
        #[arg(long)]
        sizes: Option<String>,
        /// Maximum refinement iterations.
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Stop after the iteration that reaches this many vertices.
        #[arg(long, default_value_t = slut_core::refine::DEFAULT_MAX_VERTICES)]
        max_vertices: usize,
        /// How violating simplices are split.
        #[arg(long, default_value = "midpoint-error")]
        split_rule: SplitRule,
        /// Also write OUT_DIR/table.vtk.
        #[arg(long)]
        vtk: bool,
    },
    /// Measure interpolation errors of a LUT against the model.
    #[command(args_override_self = true)]
    Stats {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Input LUT.
        #[arg(long)]
        lut: PathBuf,
        /// Probe set: barycenters or random:COUNT:SEED.
        #[arg(long, default_value = "barycenters")]
        probes: Probes,
    },
    /// Errors of uniformly sampled tables at several resolutions.
    #[command(args_override_self = true)]
    Baseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Resolutions separated by `;`, each `N` (every axis) or `N,N,N`.
        #[arg(long, default_value = "3;5;9;17")]
        resolutions: String,
    },
    /// Generate Monte Carlo events from a LUT.
    #[command(args_override_self = true)]
    Events {
        #[command(flatten)]
        common: Common,
        /// Input LUT.
        #[arg(long)]
        lut: PathBuf,
        /// Number of events.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        /// uniform (weighted points) or importance (unit-weight points).
        #[arg(long, default_value = "importance")]
        mode: SamplingMode,
        /// Reject against the linear interpolant inside each simplex.
        #[arg(long)]
        exact_density: bool,
        /// Sample |f| and carry the sign as the event weight.
        #[arg(long)]
        abs_density: bool,
        /// Events per random stream.
        #[arg(long, default_value_t = slut_core::montecarlo::DEFAULT_BATCH)]
        batch_size: usize,
    },
    /// Time the model against table-based generation and extrapolate the
    /// speedup.
    #[command(args_override_self = true)]
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        metric: MetricArgs,
        /// Initial samples per axis of the timed refinement.
        #[arg(long, default_value = "9")]
        sizes: String,
        /// Maximum refinement iterations.
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Events generated for the timing.
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        /// Direct model evaluations for the timing.
        #[arg(long, default_value_t = 2_000)]
        model_samples: usize,
        /// Event counts to extrapolate to, comma separated.
        #[arg(long, default_value = "1e7,1e10")]
        targets: String,
    },
}

fn run(cli: Cli) -> anyhow::Result<commands::Outcome> {
    match cli.command {
        Cmd::Sample { common, model, sizes, bounds, out } => commands::sample(&common, &model, &sizes, bounds, out),
        Cmd::Tessellate { common, grid, sizing, weight_limit, max_passes, split_rule, vtk } => {
            commands::tessellate(&common, &grid, sizing, weight_limit, max_passes, split_rule, vtk)
        }
        Cmd::Refine { common, model, metric, lut, grid, sizes, max_iter, max_vertices, split_rule, vtk } => {
            let input = match (lut, grid, sizes) {
                (Some(p), _, _) => commands::Input::Lut(p),
                (_, Some(p), _) => commands::Input::Grid(p),
                (_, _, s) => commands::Input::Sizes(s.unwrap_or_else(|| "9".into())),
            };
            let limits = commands::Limits { max_iter, max_vertices };
            commands::refine(&common, &model, &metric, input, limits, split_rule, vtk)
        }
        Cmd::Stats { common, model, metric, lut, probes } => commands::stats(&common, &model, &metric, &lut, probes),
        Cmd::Baseline { common, model, metric, resolutions } => {
            commands::baseline(&common, &model, &metric, &resolutions)
        }
        Cmd::Events { common, lut, n, mode, exact_density, abs_density, batch_size } => {
            commands::events(&common, &lut, n, mode, exact_density, abs_density, batch_size)
        }
        Cmd::Bench { common, model, metric, sizes, max_iter, n, model_samples, targets } => {
            commands::bench(&common, &model, &metric, &sizes, max_iter, n, model_samples, &targets)
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let args = match config::expand(&Cli::command(), args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(if e.is::<UsageError>() { EXIT_USAGE } else { 1 });
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(commands::Outcome::Done) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { EXIT_USAGE } else { 1 })
        }
    }
}
