//! Experiment configuration: one JSON file per run, overridden by flags.

use std::path::PathBuf;

use optrec::equivalence::LinearInstance;
use optrec::maxent::MomentRecord;
use optrec::QuadratureKind;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    QuadConverge,
    QuadComplexity,
    SplineFit,
    SplineSmooth,
    SplineCv,
    MaxentSolve,
    MaxentCenter,
    MaxentMinmax,
    EstimateSweep,
    Compare,
    EquivFactor2,
    EquivLambda,
    EquivAsymptotic,
}

impl Command {
    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default()
    }
}

/// The file given to `--config`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// A fully resolved run. Embedded in every artifact; feeding it back through
/// `--config` reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub seed: u64,
    pub format: Format,
    #[serde(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "params", rename_all = "kebab-case")]
pub enum Params {
    QuadConverge(QuadConverge),
    QuadComplexity(QuadComplexity),
    SplineFit(SplineFit),
    SplineSmooth(SplineSmooth),
    SplineCv(SplineCv),
    MaxentSolve(MomentRecord<f64>),
    MaxentCenter(MomentRecord<f64>),
    MaxentMinmax(MomentRecord<f64>),
    EstimateSweep(EstimateSweep),
    Compare(Compare),
    EquivFactor2(EquivFactor2),
    EquivLambda(EquivLambda),
    EquivAsymptotic(EquivAsymptotic),
}

/// Integrands on `[0, 1]` with known integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestFunction {
    Exp,
    Sin,
    Cos,
    Square,
    Cube,
    Quartic,
    Sqrt,
    Runge,
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Exp => x.exp(),
            TestFunction::Sin => x.sin(),
            TestFunction::Cos => x.cos(),
            TestFunction::Square => x * x,
            TestFunction::Cube => x * x * x,
            TestFunction::Quartic => x.powi(4),
            TestFunction::Sqrt => x.sqrt(),
            TestFunction::Runge => 1.0 / (1.0 + 25.0 * (2.0 * x - 1.0).powi(2)),
        }
    }

    pub fn integral(self) -> f64 {
        match self {
            TestFunction::Exp => std::f64::consts::E - 1.0,
            TestFunction::Sin => 1.0 - 1f64.cos(),
            TestFunction::Cos => 1f64.sin(),
            TestFunction::Square => 1.0 / 3.0,
            TestFunction::Cube => 0.25,
            TestFunction::Quartic => 0.2,
            TestFunction::Sqrt => 2.0 / 3.0,
            TestFunction::Runge => 5f64.atan() / 5.0,
        }
    }
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConverge {
    pub rule: QuadratureKind,
    pub f: TestFunction,
    pub ns: Vec<usize>,
    /// Reference value of the integral; the closed form of `f` when absent.
    pub reference: Option<f64>,
}

impl Default for QuadConverge {
    fn default() -> Self {
        Self {
            rule: QuadratureKind::Trapezoid,
            f: TestFunction::Exp,
            ns: powers_of_two(2, 9),
            reference: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadComplexity {
    pub rules: Vec<QuadratureKind>,
    pub r: usize,
    pub bound: f64,
    pub epsilons: Vec<f64>,
}

impl Default for QuadComplexity {
    fn default() -> Self {
        Self {
            rules: vec![QuadratureKind::Trapezoid, QuadratureKind::Simpson],
            r: 4,
            bound: 1.0,
            epsilons: decades(2, 8),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineFit {
    pub knots: Vec<f64>,
    pub y: Vec<f64>,
    pub grid_points: usize,
}

impl Default for SplineFit {
    fn default() -> Self {
        Self {
            knots: Vec::new(),
            y: Vec::new(),
            grid_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineSmooth {
    pub knots: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: f64,
    pub grid_points: usize,
}

impl Default for SplineSmooth {
    fn default() -> Self {
        Self {
            knots: Vec::new(),
            y: Vec::new(),
            lambda: 1.0,
            grid_points: 101,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplineCv {
    pub knots: Vec<f64>,
    pub y: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl Default for SplineCv {
    fn default() -> Self {
        Self {
            knots: Vec::new(),
            y: Vec::new(),
            lambdas: (-4..=4).map(|k| 10f64.powi(k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSweep {
    pub sigmas: Vec<f64>,
    pub taus: Vec<f64>,
}

impl Default for EstimateSweep {
    fn default() -> Self {
        let grid = vec![0.1, 0.5, 1.0, 2.0];
        Self {
            sigmas: grid.clone(),
            taus: grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionName {
    Exponent,
    WorstCase,
    AverageCase,
    Complexity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Compare {
    pub first: QuadratureKind,
    pub second: QuadratureKind,
    pub first_ns: Vec<usize>,
    pub second_ns: Vec<usize>,
    pub criterion: CriterionName,
    /// Smoothness ball for worst-case and complexity criteria.
    pub r: usize,
    pub bound: f64,
    pub epsilons: Vec<f64>,
    /// Wiener measure for the average-case criterion.
    pub fold: usize,
    pub grid_size: usize,
    pub trials: usize,
}

impl Default for Compare {
    fn default() -> Self {
        Self {
            first: QuadratureKind::Simpson,
            second: QuadratureKind::Trapezoid,
            first_ns: powers_of_two(1, 6),
            second_ns: powers_of_two(1, 6),
            criterion: CriterionName::Exponent,
            r: 4,
            bound: 1.0,
            epsilons: decades(2, 8),
            fold: 0,
            grid_size: 4096,
            trials: 1000,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (1..=100).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivFactor2 {
    pub seeds: Vec<u64>,
    pub max_dim: usize,
    pub samples: usize,
    /// Instances to use instead of generating them from `seeds`.
    pub instances: Option<Vec<LinearInstance>>,
}

impl Default for EquivFactor2 {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            max_dim: 8,
            samples: 20_000,
            instances: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivLambda {
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub max_dim: usize,
    pub samples: usize,
}

impl Default for EquivLambda {
    fn default() -> Self {
        Self {
            seeds: (1..=20).collect(),
            lambdas: vec![0.5, 1.0, 2.0, 10.0],
            max_dim: 8,
            samples: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivAsymptotic {
    pub seeds: Vec<u64>,
    pub max_dim: usize,
}

impl Default for EquivAsymptotic {
    fn default() -> Self {
        Self {
            seeds: default_seeds(),
            max_dim: 8,
        }
    }
}

impl Params {
    pub fn command(&self) -> Command {
        match self {
            Params::QuadConverge(_) => Command::QuadConverge,
            Params::QuadComplexity(_) => Command::QuadComplexity,
            Params::SplineFit(_) => Command::SplineFit,
            Params::SplineSmooth(_) => Command::SplineSmooth,
            Params::SplineCv(_) => Command::SplineCv,
            Params::MaxentSolve(_) => Command::MaxentSolve,
            Params::MaxentCenter(_) => Command::MaxentCenter,
            Params::MaxentMinmax(_) => Command::MaxentMinmax,
            Params::EstimateSweep(_) => Command::EstimateSweep,
            Params::Compare(_) => Command::Compare,
            Params::EquivFactor2(_) => Command::EquivFactor2,
            Params::EquivLambda(_) => Command::EquivLambda,
            Params::EquivAsymptotic(_) => Command::EquivAsymptotic,
        }
    }

    /// Builds the parameters of `command` from a JSON object; absent fields
    /// take their defaults, unknown fields are rejected.
    pub fn from_map(command: Command, map: Map<String, Value>) -> Result<Self, CliError> {
        let tagged = serde_json::json!({ "command": command, "params": Value::Object(map) });
        let params: Params = serde_json::from_value(tagged)
            .map_err(|e| CliError::Config(format!("params of {}: {e}", command.name())))?;
        params.check_required()?;
        Ok(params)
    }

    fn check_required(&self) -> Result<(), CliError> {
        let missing = |field: &str| {
            Err(CliError::Config(format!(
                "params.{field} is required for {}",
                self.command().name()
            )))
        };
        match self {
            Params::SplineFit(p) if p.knots.is_empty() => missing("knots"),
            Params::SplineSmooth(p) if p.knots.is_empty() => missing("knots"),
            Params::SplineCv(p) if p.knots.is_empty() => missing("knots"),
            Params::MaxentSolve(r) | Params::MaxentCenter(r) | Params::MaxentMinmax(r)
                if r.m == 0 =>
            {
                missing("m")
            }
            _ => Ok(()),
        }
    }
}
