//! `stgibbs`: simulation, fitting, selection and validation of
//! spatio-temporal hybrid Strauss hardcore models from the command line.
//!
//! Every subcommand reads text inputs, writes its artifacts atomically into
//! `--out`, and stamps each artifact with the run's config hash and seed.
//! Failures print one JSON record on stderr and exit with 2 (configuration),
//! 3 (data) or 4 (numerical failure).

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use stgibbs_core::summaries::GIntensity;
use stgibbs_core::{Error, ErrorKind, Result};

pub mod artifact;
mod commands;
pub mod parse;
pub mod synth;

#[derive(Debug, Parser)]
#[command(name = "stgibbs", version, about = "Spatio-temporal Gibbs point process workflow")]
pub struct Cli {
    /// Worker threads for replicate-level parallelism (0: all cores).
    #[arg(long, global = true, env = "STGIBBS_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate replicate patterns from a model spec.
    Simulate(SimulateArgs),
    /// Pareto front of interpoint distances and the chosen hardcore.
    Pareto(ParetoArgs),
    /// Fit regular parameters by logistic likelihood.
    Fit(FitArgs),
    /// Rank candidate interaction radii by AIC.
    Select(SelectArgs),
    /// Pair correlation surface of a pattern.
    Gpcf(GpcfArgs),
    /// Simulation envelope test of a fitted model.
    Envelope(EnvelopeArgs),
    /// Write a synthetic wildfire-like dataset with covariates.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model spec (TOML).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Total birth-death iterations per chain [default: 200 E, at least 1000].
    #[arg(long)]
    pub steps: Option<u64>,
    /// Burn-in iterations [default: 10 E].
    #[arg(long)]
    pub burnin: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ParetoArgs {
    /// Point pattern (CSV with header `x,y,t`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model spec supplying the window.
    #[arg(long)]
    pub model: PathBuf,
    /// `max-area`, `ratio=R` or `manual=HS,HT`.
    #[arg(long, default_value = "max-area")]
    pub policy: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model structure; interaction strengths are ignored.
    #[arg(long)]
    pub model: PathBuf,
    /// Take the hardcore from a `pareto.toml`.
    #[arg(long)]
    pub hardcore_from: Option<PathBuf>,
    /// Dummy intensity multiplier.
    #[arg(long, default_value_t = 4.0)]
    pub c_factor: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model spec supplying window, trend and hardcore.
    #[arg(long)]
    pub model: PathBuf,
    /// Candidate radii (TOML list or grid).
    #[arg(long)]
    pub candidates: PathBuf,
    #[arg(long)]
    pub hardcore_from: Option<PathBuf>,
    #[arg(long, default_value_t = 4.0)]
    pub c_factor: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntensityArg {
    Trend,
    Homogeneous,
    LeaveOneOut,
}

impl From<IntensityArg> for GIntensity {
    fn from(a: IntensityArg) -> Self {
        match a {
            IntensityArg::Trend => GIntensity::Trend,
            IntensityArg::Homogeneous => GIntensity::Homogeneous,
            IntensityArg::LeaveOneOut => GIntensity::LeaveOneOut,
        }
    }
}

#[derive(Debug, Args)]
pub struct SurfaceArgs {
    /// Spatial lags, `start:end:n` or a comma list [default: 9 lags over 5-25% of the shorter side].
    #[arg(long)]
    pub u: Option<String>,
    /// Temporal lags [default: 9 lags over 5-25% of the duration].
    #[arg(long)]
    pub v: Option<String>,
    /// Kernel bandwidths `SPATIAL,TEMPORAL` [default: Silverman].
    #[arg(long)]
    pub bandwidths: Option<String>,
    /// First-order intensity in the estimator.
    #[arg(long, value_enum, default_value_t = IntensityArg::Trend)]
    pub intensity: IntensityArg,
}

#[derive(Debug, Args)]
pub struct GpcfArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model spec supplying the window (and the trend for `--intensity trend`).
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Fitted model spec.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 99)]
    pub nsim: usize,
    /// Coverage of the global envelope.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[command(flatten)]
    pub surface: SurfaceArgs,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub burnin: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Target number of events.
    #[arg(long, default_value_t = 432)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Files written by a successful run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub config_hash: String,
    pub artifacts: Vec<PathBuf>,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Pareto(a) => commands::pareto(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Select(a) => commands::select(&a),
        Command::Gpcf(a) => commands::gpcf(&a),
        Command::Envelope(a) => commands::envelope(&a),
        Command::Synth(a) => synth::run(&a),
    })
}

pub fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numerical => 4,
    }
}

/// Machine-readable error record printed on stderr.
pub fn error_record(e: &Error) -> String {
    let kind = match e.kind() {
        ErrorKind::Config => "config",
        ErrorKind::Data => "data",
        ErrorKind::Numerical => "numerical",
    };
    serde_json::json!({
        "error": {
            "kind": kind,
            "exit_code": exit_code(e.kind()),
            "message": e.to_string(),
        }
    })
    .to_string()
}

/// Parses `args`, runs the command and reports the outcome.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(out) => {
            for a in &out.artifacts {
                println!("{}", a.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
