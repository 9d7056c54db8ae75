//! Batch experiment runner for `optrec`.
//!
//! A run is described by a JSON config file (see [`config::ConfigFile`]);
//! command-line flags override its fields. Results go to `--out` (written
//! atomically) or stdout, preceded by the resolved config so the artifact
//! alone is enough to repeat the run.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{Map, Value};

use config::{Command, ConfigFile, Format, Params, ResolvedConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit statuses.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{module}: {source}")]
    Library {
        module: &'static str,
        #[source]
        source: optrec::Error,
    },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub(crate) fn module(module: &'static str) -> impl Fn(optrec::Error) -> CliError + Copy {
        move |source| CliError::Library { module, source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Library { source, .. } if source.is_usage() => EXIT_CONFIG,
            CliError::Library { .. } | CliError::Io(_) => EXIT_NUMERIC,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "optrec", version, about = "Optimal recovery experiments")]
pub struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for randomized runs.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// May be omitted when the config file names the command.
    #[command(subcommand)]
    pub command: Option<Cmd>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Convergence exponent of a quadrature family.
    QuadConverge(QuadConvergeArgs),
    /// ε-complexity profiles of quadrature families.
    QuadComplexity(QuadComplexityArgs),
    /// Cubic spline interpolation and smoothing.
    #[command(subcommand)]
    Spline(SplineCmd),
    /// Point selection in a probability simplex under moment constraints.
    #[command(subcommand)]
    Maxent(MaxentCmd),
    /// Scalar estimation from a noisy observation.
    #[command(subcommand)]
    Estimate(EstimateCmd),
    /// Compare two quadrature strategies under one criterion.
    Compare(CompareArgs),
    /// Linear-problem experiments on the interpolatory, central and optimization algorithms.
    #[command(subcommand)]
    Equiv(EquivCmd),
}

#[derive(Debug, Subcommand)]
pub enum SplineCmd {
    /// Natural cubic interpolating spline.
    Fit(SplineArgs),
    /// Smoothing spline for a fixed λ.
    Smooth(SplineArgs),
    /// Leave-one-out choice of λ.
    Cv(SplineArgs),
}

#[derive(Debug, Subcommand)]
pub enum MaxentCmd {
    /// Maximum-entropy distribution.
    Solve(MaxentArgs),
    /// Chebyshev center of the feasible polytope.
    Center(MaxentArgs),
    /// Feasible point with the smallest largest coordinate.
    Minmax(MaxentArgs),
}

#[derive(Debug, Subcommand)]
pub enum EstimateCmd {
    /// Error table over a σ × τ grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum EquivCmd {
    /// Interpolatory vs central algorithm on random instances.
    Factor2(Factor2Args),
    /// Optimization algorithm across λ.
    Lambda(LambdaArgs),
    /// Error bound as information grows.
    Asymptotic(AsymptoticArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct QuadConvergeArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rule: Option<String>,
    /// Integrand: exp, sin, cos, square, cube, quartic, sqrt, runge.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    f: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    ns: Vec<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct QuadComplexityArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    rules: Vec<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    epsilons: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SplineArgs {
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    knots: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    y: Vec<f64>,
    /// Smoothing parameter (smooth only).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    /// Candidate λ values (cv only).
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    lambdas: Vec<f64>,
    /// Points in the output grid (fit and smooth).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_points: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct MaxentArgs {
    /// Number of categories.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    /// Constraint rows as a JSON array of arrays.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<Json>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    y: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sigmas: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    taus: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CompareArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    first: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    second: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    first_ns: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    second_ns: Vec<usize>,
    /// exponent, worst-case, average-case or complexity.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    criterion: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    r: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    epsilons: Vec<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    fold: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_size: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
}

/// Instance seeds, e.g. `1..100` or `3,5,8`.
#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct Seeds(Vec<u64>);

impl std::str::FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = |_| format!("bad seed list '{s}'");
        if let Some((a, b)) = s.split_once("..") {
            let (a, b): (u64, u64) = (
                a.trim().parse().map_err(bad)?,
                b.trim().parse().map_err(bad)?,
            );
            if a > b {
                return Err(format!("empty seed range '{s}'"));
            }
            return Ok(Seeds((a..=b).collect()));
        }
        s.split(',')
            .map(|t| t.trim().parse().map_err(bad))
            .collect::<Result<_, _>>()
            .map(Seeds)
    }
}

/// A flag value holding raw JSON.
#[derive(Debug, Clone, Serialize)]
#[serde(transparent)]
pub struct Json(Value);

impl std::str::FromStr for Json {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_str(s).map(Json).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Factor2Args {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Seeds>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct LambdaArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Seeds>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    lambdas: Vec<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct AsymptoticArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seeds: Option<Seeds>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_dim: Option<usize>,
}

fn overrides(args: &impl Serialize) -> Map<String, Value> {
    match serde_json::to_value(args) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

impl Cmd {
    fn split(&self) -> (Command, Map<String, Value>) {
        match self {
            Cmd::QuadConverge(a) => (Command::QuadConverge, overrides(a)),
            Cmd::QuadComplexity(a) => (Command::QuadComplexity, overrides(a)),
            Cmd::Spline(SplineCmd::Fit(a)) => (Command::SplineFit, overrides(a)),
            Cmd::Spline(SplineCmd::Smooth(a)) => (Command::SplineSmooth, overrides(a)),
            Cmd::Spline(SplineCmd::Cv(a)) => (Command::SplineCv, overrides(a)),
            Cmd::Maxent(MaxentCmd::Solve(a)) => (Command::MaxentSolve, overrides(a)),
            Cmd::Maxent(MaxentCmd::Center(a)) => (Command::MaxentCenter, overrides(a)),
            Cmd::Maxent(MaxentCmd::Minmax(a)) => (Command::MaxentMinmax, overrides(a)),
            Cmd::Estimate(EstimateCmd::Sweep(a)) => (Command::EstimateSweep, overrides(a)),
            Cmd::Compare(a) => (Command::Compare, overrides(a)),
            Cmd::Equiv(EquivCmd::Factor2(a)) => (Command::EquivFactor2, overrides(a)),
            Cmd::Equiv(EquivCmd::Lambda(a)) => (Command::EquivLambda, overrides(a)),
            Cmd::Equiv(EquivCmd::Asymptotic(a)) => (Command::EquivAsymptotic, overrides(a)),
        }
    }
}

/// Parsed flags merged over the config file.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub config: ResolvedConfig,
    pub out: Option<PathBuf>,
}

pub fn read_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn resolve(cli: &Cli) -> Result<Invocation, CliError> {
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => ConfigFile {
            command: None,
            seed: None,
            format: None,
            out: None,
            params: Map::new(),
        },
    };
    let flag_cmd = cli.command.as_ref().map(Cmd::split);
    let command = match (&flag_cmd, file.command) {
        (Some((c, _)), Some(f)) if *c != f => {
            return Err(CliError::Config(format!(
                "subcommand {} contradicts config command {}",
                c.name(),
                f.name()
            )))
        }
        (Some((c, _)), _) => *c,
        (None, Some(f)) => f,
        (None, None) => {
            return Err(CliError::Config(
                "no subcommand given and config names no command".into(),
            ))
        }
    };
    let mut params = file.params;
    if let Some((_, flags)) = flag_cmd {
        params.extend(flags);
    }
    let params = Params::from_map(command, params)?;
    Ok(Invocation {
        config: ResolvedConfig {
            seed: cli.seed.or(file.seed).unwrap_or(0),
            format: cli.format.or(file.format).unwrap_or(Format::Csv),
            params,
        },
        out: cli.out.clone().or(file.out),
    })
}

/// The artifact text for `cfg`: a header naming the version and resolved
/// config, then the results.
pub fn render(cfg: &ResolvedConfig) -> Result<String, CliError> {
    let artifact = commands::execute(cfg)?;
    let config = serde_json::to_value(cfg).expect("config serializes");
    Ok(match cfg.format {
        Format::Csv => format!("# optrec {VERSION}\n# config: {config}\n{}", artifact.csv),
        Format::Json => {
            let doc =
                serde_json::json!({ "optrec": VERSION, "config": config, "result": artifact.json });
            let mut s = serde_json::to_string_pretty(&doc).expect("result serializes");
            s.push('\n');
            s
        }
    })
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("OPTREC_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "OPTREC_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    // a second initialisation in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    let inv = resolve(cli)?;
    let text = render(&inv.config)?;
    match &inv.out {
        Some(p) => write_atomic(p, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

/// Parses `args`, runs, and returns the exit status. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("optrec: {e}");
            e.exit_code()
        }
    }
}
