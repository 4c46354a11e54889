//! Command-line front end: argument definitions and command implementations.
//!
//! Every command returns an [`Outcome`]: an exit code plus a JSON document
//! for standard output. Logs go to standard error.

mod evaluate;
mod tables;
mod validate;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

pub use evaluate::{cmd_evaluate, RunConfig};
pub use tables::{cmd_erode_sweep, cmd_report, ReportOptions, SweepConfig};
pub use validate::{cmd_validate, Violation};

use crate::align::ClipRange;
use crate::depthio::PerturbationType;
use crate::error::PdeError;
use crate::geom::{demo_synth_spec, synthesize, SynthSpec};
use crate::metrics::{AlignStrategy, EvalConfig, MaskScope, MetricKind};
use crate::report::{PerturbationAxis, Statistic};

#[derive(Debug, Parser)]
#[command(
    name = "pde",
    version,
    about = "Depth-estimation robustness evaluation over perturbed scene groups"
)]
pub struct Cli {
    /// Worker threads, 0 for one per core.
    #[arg(long, global = true, env = "PDE_THREADS", default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate every (model, group) pair of a manifest.
    Evaluate(EvaluateArgs),
    /// Render a synthetic fixture benchmark.
    Synth(SynthArgs),
    /// Rank models from computed or published result tables.
    Report(ReportArgs),
    /// Re-evaluate one model at several object-mask erosion radii.
    ErodeSweep(SweepArgs),
    /// Check a manifest without evaluating it.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    Object,
    Scene,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlignArg {
    ScaleShift,
    Scale,
}

/// Flags shared by `evaluate` and `erode-sweep`.
#[derive(Debug, Clone, Args)]
pub struct EvalFlags {
    #[arg(long, value_enum, default_value = "object")]
    pub mask: MaskArg,
    #[arg(long, value_enum, default_value = "scale-shift")]
    pub align: AlignArg,
    /// Disable clipping of aligned depth to [0.1, 1000] m.
    #[arg(long)]
    pub no_clip: bool,
    /// Comma-separated metrics (default: all).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<MetricKind>,
}

impl EvalFlags {
    pub fn to_config(&self, erosion_radius: usize) -> EvalConfig {
        EvalConfig {
            mask_scope: match self.mask {
                MaskArg::Object => MaskScope::Object,
                MaskArg::Scene => MaskScope::FullScene,
            },
            align: match self.align {
                AlignArg::ScaleShift => AlignStrategy::ScaleShift,
                AlignArg::Scale => AlignStrategy::Scale,
            },
            erosion_radius,
            clip: if self.no_clip {
                ClipRange::disabled()
            } else {
                ClipRange::default()
            },
            metrics: if self.metrics.is_empty() {
                MetricKind::ALL.to_vec()
            } else {
                self.metrics.clone()
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Object-mask erosion radius in pixels (default: the manifest's).
    #[arg(long)]
    pub erosion: Option<usize>,
    #[command(flatten)]
    pub eval: EvalFlags,
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub perturbations: Vec<PerturbationType>,
    /// Exit 0 when the only problems are skipped records.
    #[arg(long)]
    pub allow_skips: bool,
    /// Add per-category cells to the aggregate table.
    #[arg(long)]
    pub by_category: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Synthesis spec (JSON); the built-in demo benchmark when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed of the synthesis file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Image side length of the demo benchmark.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// A results directory from `evaluate`, or a CSV/JSON table.
    pub input: PathBuf,
    #[arg(long, default_value = "absrel")]
    pub metric: MetricKind,
    /// Statistics to rank by (default: mu, sigma, kappa).
    #[arg(long, value_delimiter = ',')]
    pub statistics: Vec<Statistic>,
    #[arg(long, default_value = "average")]
    pub perturbation: PerturbationAxis,
    /// Also write the table here (format from the extension).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model: String,
    /// Non-decreasing, comma-separated radii.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    pub radii: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

/// Result of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: Value,
}

impl Outcome {
    pub fn ok(stdout: Value) -> Self {
        Outcome { code: 0, stdout }
    }

    pub fn failed(stdout: Value) -> Self {
        Outcome { code: 1, stdout }
    }

    pub(crate) fn from_error(err: &PdeError) -> Self {
        Outcome::failed(json!({ "status": "error", "errors": [error_json(err)] }))
    }
}

pub(crate) fn error_json(err: &PdeError) -> Value {
    let kind = match err {
        PdeError::Io { .. } => "io",
        PdeError::Format { .. } => "format",
        PdeError::Bounds(_) => "bounds",
        PdeError::Schema { .. } => "schema",
        PdeError::Parameter(_) => "parameter",
        PdeError::DegenerateFit(_) => "degenerate_fit",
        PdeError::EmptyMask(_) => "empty_mask",
        PdeError::Data(_) => "data",
        PdeError::Aggregation(_) => "aggregation",
        PdeError::Ranking { .. } => "ranking",
        PdeError::Parse { .. } => "parse",
        PdeError::Rejected(_) => "rejected",
        PdeError::Group { .. } => "group",
    };
    json!({ "kind": kind, "message": err.to_string() })
}

pub fn cmd_synth(spec: &SynthSpec, out: &std::path::Path) -> Outcome {
    match synthesize(spec, out) {
        Ok((bench, manifest)) => Outcome::ok(json!({
            "status": "ok",
            "manifest": manifest,
            "groups": bench.groups.len(),
            "models": bench.models.iter().map(|m| m.name.clone()).collect::<Vec<_>>(),
        })),
        Err(e) => Outcome::from_error(&e),
    }
}

fn read_synth_spec(args: &SynthArgs) -> Result<SynthSpec, PdeError> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| PdeError::io(path, e))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de)
                .map_err(|e| PdeError::schema(e.path().to_string(), e.inner().to_string()))?
        }
        None => demo_synth_spec(args.size, args.seed.unwrap_or(0)),
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Outcome {
    let threads = cli.threads;
    match cli.command {
        Command::Evaluate(a) => {
            let config = RunConfig {
                manifest: a.manifest,
                out_dir: a.out,
                erosion_radius: a.erosion,
                eval: a.eval,
                threads,
                models: a.models,
                perturbations: a.perturbations,
                allow_skips: a.allow_skips,
                by_category: a.by_category,
            };
            cmd_evaluate(&config)
        }
        Command::Synth(a) => match read_synth_spec(&a) {
            Ok(spec) => cmd_synth(&spec, &a.out),
            Err(e) => Outcome::from_error(&e),
        },
        Command::Report(a) => cmd_report(&ReportOptions {
            input: a.input,
            metric: a.metric,
            statistics: a.statistics,
            perturbation: a.perturbation,
            out: a.out,
        }),
        Command::ErodeSweep(a) => cmd_erode_sweep(&SweepConfig {
            manifest: a.manifest,
            model: a.model,
            radii: a.radii,
            out_dir: a.out,
            eval: a.eval,
            threads,
        }),
        Command::Validate(a) => cmd_validate(&a.manifest),
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn run_from_args<I, T>(args: I) -> Result<Outcome, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Ok(run(Cli::try_parse_from(args)?))
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool, PdeError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| PdeError::Parameter(format!("thread pool: {e}")))
}
