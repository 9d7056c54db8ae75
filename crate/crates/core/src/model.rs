//! Problems, information operators, algorithms and strategies.
//!
//! A problem maps an instance `f` to a solution `S(f)`. Only partial data about
//! `f` is available: the information operator samples `f` at a few nodes,
//! possibly with noise or at random nodes. An algorithm turns that data into an
//! approximation, and a strategy is an indexed family of (algorithm,
//! information) pairs built from the same idea.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, QuadratureKind};
use crate::scalar::Real;

/// The deterministic generator behind every seeded draw in the crate.
pub type SeededRng = ChaCha8Rng;

/// ChaCha8 stream for `seed`.
pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

type SolutionFn<T> = dyn Fn(&dyn Fn(T) -> T) -> T + Send + Sync;

/// A solution map `S` acting on real functions over `[lo, hi]`.
#[derive(Clone)]
pub struct Problem1D<T> {
    lo: T,
    hi: T,
    solution: Arc<SolutionFn<T>>,
}

impl<T: Real> Problem1D<T> {
    pub fn new(
        lo: T,
        hi: T,
        solution: impl Fn(&dyn Fn(T) -> T) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::usage(format!("empty domain [{lo}, {hi}]")));
        }
        Ok(Self {
            lo,
            hi,
            solution: Arc::new(solution),
        })
    }

    /// `S(f) = ∫_lo^hi f`, evaluated with a 64-point Gauss-Legendre rule.
    pub fn integration(lo: T, hi: T) -> Result<Self> {
        let (nodes, weights) = quadrature::gauss_legendre_rule::<T>(64)?;
        Self::new(lo, hi, move |f| {
            let len = hi - lo;
            nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * f(lo + len * x))
                .sum::<T>()
                * len
        })
    }

    pub fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn solve(&self, f: &dyn Fn(T) -> T) -> T {
        (self.solution)(f)
    }
}

impl<T: Real> fmt::Debug for Problem1D<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem1D")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .finish_non_exhaustive()
    }
}

/// How sampled values are corrupted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel<T> {
    Exact,
    /// Independent `N(0, sigma²)` perturbation of every sample.
    GaussianIid {
        sigma: T,
    },
    /// A perturbation vector drawn uniformly from the Euclidean ball of
    /// radius `delta`.
    BoundedL2 {
        delta: T,
    },
}

impl<T: Real> NoiseModel<T> {
    fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::GaussianIid { sigma } if !(sigma >= T::zero()) => Err(Error::usage(
                format!("noise sigma must be >= 0, got {sigma}"),
            )),
            NoiseModel::BoundedL2 { delta } if !(delta >= T::zero()) => Err(Error::usage(format!(
                "noise delta must be >= 0, got {delta}"
            ))),
            _ => Ok(()),
        }
    }

    /// False for `Exact` and for zero-level noise.
    pub fn is_active(&self) -> bool {
        match *self {
            NoiseModel::Exact => false,
            NoiseModel::GaussianIid { sigma } => sigma > T::zero(),
            NoiseModel::BoundedL2 { delta } => delta > T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Nodes<T> {
    Fixed(Vec<T>),
    Uniform { count: usize },
}

/// The information operator `N`: point evaluations at fixed or uniformly
/// random nodes, plus a noise model.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationOperator<T> {
    lo: T,
    hi: T,
    nodes: Nodes<T>,
    noise: NoiseModel<T>,
}

impl<T: Real> InformationOperator<T> {
    /// Evaluations at the given nodes, all of which must lie in `[lo, hi]`.
    pub fn fixed(domain: (T, T), points: Vec<T>, noise: NoiseModel<T>) -> Result<Self> {
        let (lo, hi) = check_domain(domain)?;
        if points.is_empty() {
            return Err(Error::usage("information needs at least one point"));
        }
        if let Some((i, x)) = points
            .iter()
            .enumerate()
            .find(|(_, &x)| !(x >= lo && x <= hi))
        {
            return Err(Error::Domain(format!(
                "point {i} = {x} outside [{lo}, {hi}]"
            )));
        }
        noise.validate()?;
        Ok(Self {
            lo,
            hi,
            nodes: Nodes::Fixed(points),
            noise,
        })
    }

    /// `count` evaluations at independent uniform nodes, drawn per call.
    pub fn randomized(domain: (T, T), count: usize, noise: NoiseModel<T>) -> Result<Self> {
        let (lo, hi) = check_domain(domain)?;
        if count == 0 {
            return Err(Error::usage("randomized information needs count >= 1"));
        }
        noise.validate()?;
        Ok(Self {
            lo,
            hi,
            nodes: Nodes::Uniform { count },
            noise,
        })
    }

    /// Number of functionals, i.e. the length of every data vector.
    pub fn len(&self) -> usize {
        match &self.nodes {
            Nodes::Fixed(p) => p.len(),
            Nodes::Uniform { count } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self.nodes, Nodes::Uniform { .. })
    }

    /// Fixed nodes, `None` for randomized information.
    pub fn points(&self) -> Option<&[T]> {
        match &self.nodes {
            Nodes::Fixed(p) => Some(p),
            Nodes::Uniform { .. } => None,
        }
    }

    pub fn noise(&self) -> NoiseModel<T> {
        self.noise
    }

    pub fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn requires_seed(&self) -> bool {
        self.is_randomized() || self.noise.is_active()
    }
}

fn check_domain<T: Real>((lo, hi): (T, T)) -> Result<(T, T)> {
    if lo < hi && lo.is_finite() && hi.is_finite() {
        Ok((lo, hi))
    } else {
        Err(Error::usage(format!("invalid domain [{lo}, {hi}]")))
    }
}

/// Data `y = N(f, n)` together with the nodes that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataVector<T> {
    pub values: Vec<T>,
    pub points: Vec<T>,
    pub seed: Option<u64>,
}

impl<T> DataVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Applies `op` to `f`. Random nodes are drawn first, then the noise, both
/// from a ChaCha8 stream seeded with `seed`.
pub fn apply_information<T: Real>(
    op: &InformationOperator<T>,
    f: impl Fn(T) -> T,
    seed: Option<u64>,
) -> Result<DataVector<T>> {
    let mut rng = match (seed, op.requires_seed()) {
        (Some(s), _) => Some(seeded_rng(s)),
        (None, false) => None,
        (None, true) => {
            return Err(Error::usage(
                "randomized or noisy information requires a seed",
            ))
        }
    };

    let points = match &op.nodes {
        Nodes::Fixed(p) => p.clone(),
        Nodes::Uniform { count } => {
            let rng = rng.as_mut().expect("seeded above");
            let len = op.hi - op.lo;
            (0..*count)
                .map(|_| op.lo + len * T::lit(rng.random::<f64>()))
                .collect()
        }
    };

    let mut values = Vec::with_capacity(points.len());
    for (i, &x) in points.iter().enumerate() {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::numeric(format!("f({x}) = {v} at node {i}")));
        }
        values.push(v);
    }

    if op.noise.is_active() {
        let rng = rng.as_mut().expect("seeded above");
        match op.noise {
            NoiseModel::GaussianIid { sigma } => {
                for v in values.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = *v + sigma * T::lit(z);
                }
            }
            NoiseModel::BoundedL2 { delta } => {
                let dir: Vec<f64> = (0..values.len())
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
                let radius = rng.random::<f64>().powf(1.0 / values.len() as f64);
                for (v, d) in values.iter_mut().zip(dir) {
                    *v = *v + delta * T::lit(radius * d / norm);
                }
            }
            NoiseModel::Exact => unreachable!(),
        }
    }

    Ok(DataVector {
        values,
        points,
        seed,
    })
}

type CustomFn<T> = dyn Fn(&[T]) -> Result<T> + Send + Sync;

/// An algorithm `A` mapping data to an approximation.
#[derive(Clone)]
pub enum Algorithm<T> {
    /// `Σ w_i y_i`; every deterministic quadrature is of this form.
    WeightedSum(Vec<T>),
    /// Arithmetic mean of the data (Monte Carlo).
    Mean,
    Custom(Arc<CustomFn<T>>),
}

impl<T: Real> Algorithm<T> {
    pub fn custom(f: impl Fn(&[T]) -> Result<T> + Send + Sync + 'static) -> Self {
        Algorithm::Custom(Arc::new(f))
    }

    pub fn apply(&self, data: &[T]) -> Result<T> {
        match self {
            Algorithm::WeightedSum(w) => {
                if w.len() != data.len() {
                    return Err(Error::usage(format!(
                        "weighted sum expects {} values, got {}",
                        w.len(),
                        data.len()
                    )));
                }
                Ok(w.iter().zip(data).map(|(&w, &y)| w * y).sum())
            }
            Algorithm::Mean => {
                if data.is_empty() {
                    return Err(Error::usage("mean of empty data"));
                }
                Ok(data.iter().copied().sum::<T>() / T::lit(data.len() as f64))
            }
            Algorithm::Custom(f) => f(data),
        }
    }

    /// Linear algorithms map zero data to zero.
    pub fn is_linear(&self) -> bool {
        !matches!(self, Algorithm::Custom(_))
    }
}

impl<T: fmt::Debug> fmt::Debug for Algorithm<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::WeightedSum(w) => f.debug_tuple("WeightedSum").field(w).finish(),
            Algorithm::Mean => f.write_str("Mean"),
            Algorithm::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// One `(algorithm, information)` pair of a strategy.
#[derive(Debug, Clone)]
pub struct Member<T> {
    pub algorithm: Algorithm<T>,
    pub information: InformationOperator<T>,
}

impl<T: Real> Member<T> {
    pub fn new(algorithm: Algorithm<T>, information: InformationOperator<T>) -> Self {
        Self {
            algorithm,
            information,
        }
    }

    /// Number of samples used.
    pub fn cost(&self) -> usize {
        self.information.len()
    }

    pub fn run(&self, f: impl Fn(T) -> T, seed: Option<u64>) -> Result<T> {
        run_strategy(self, f, seed)
    }
}

/// `A(N(f, n))` for a single member.
pub fn run_strategy<T: Real>(
    member: &Member<T>,
    f: impl Fn(T) -> T,
    seed: Option<u64>,
) -> Result<T> {
    let data = apply_information(&member.information, f, seed)?;
    member.algorithm.apply(&data.values).map_err(|e| match e {
        Error::Numeric(m) => Error::Numeric(format!("algorithm: {m}")),
        Error::Usage(m) => Error::Usage(format!("algorithm: {m}")),
        other => other,
    })
}

/// An indexed family `{U_i}` of members, ordered by index.
#[derive(Debug, Clone)]
pub struct Strategy<T> {
    name: String,
    members: Vec<Member<T>>,
    family: Option<(QuadratureKind, Vec<usize>)>,
}

impl<T: Real> Strategy<T> {
    pub fn new(name: impl Into<String>, members: Vec<Member<T>>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::usage("strategy needs at least one member"));
        }
        Ok(Self {
            name: name.into(),
            members,
            family: None,
        })
    }

    /// Tags the strategy as the built-in quadrature family `kind` with the
    /// given panel counts (one per member).
    pub(crate) fn with_family(mut self, kind: QuadratureKind, ns: Vec<usize>) -> Self {
        debug_assert_eq!(ns.len(), self.members.len());
        self.family = Some((kind, ns));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[Member<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Built-in quadrature family and panel counts, if any.
    pub fn family(&self) -> Option<(QuadratureKind, &[usize])> {
        self.family.as_ref().map(|(k, ns)| (*k, ns.as_slice()))
    }

    pub fn cost_of(&self, index: usize) -> Option<usize> {
        self.members.get(index).map(Member::cost)
    }

    /// The most expensive member whose cost does not exceed `budget`.
    pub fn member_within_budget(&self, budget: usize) -> Option<(usize, &Member<T>)> {
        self.members
            .iter()
            .enumerate()
            .filter(|(_, m)| m.cost() <= budget)
            .max_by_key(|(i, m)| (m.cost(), *i))
    }
}

/// A scalar or a function sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value<T> {
    Scalar(T),
    Gridded { grid: Vec<T>, values: Vec<T> },
}

impl<T: Real> Value<T> {
    pub fn gridded(grid: Vec<T>, f: impl Fn(T) -> T) -> Self {
        let values = grid.iter().map(|&x| f(x)).collect();
        Value::Gridded { grid, values }
    }
}

/// `|g1 - g2|` for scalars, the grid sup-norm of the difference otherwise.
pub fn distance<T: Real>(g1: &Value<T>, g2: &Value<T>) -> Result<T> {
    match (g1, g2) {
        (Value::Scalar(a), Value::Scalar(b)) => Ok((*a - *b).abs()),
        (
            Value::Gridded {
                grid: ga,
                values: va,
            },
            Value::Gridded {
                grid: gb,
                values: vb,
            },
        ) => {
            if ga != gb || va.len() != ga.len() || vb.len() != gb.len() {
                return Err(Error::usage("gridded values live on different grids"));
            }
            Ok(va
                .iter()
                .zip(vb)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
        }
        _ => Err(Error::usage(
            "cannot measure distance between a scalar and a gridded function",
        )),
    }
}
