//! Composite and Gaussian quadratures on `[0, 1]`, Monte Carlo integration,
//! and empirical convergence exponents.
//!
//! Error terms for smooth `f`:
//! trapezoid `-f''(ξ) / (12 n²)`, Simpson `-f⁗(ξ) / (2880 n⁴)`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    apply_information, Algorithm, InformationOperator, Member, NoiseModel, Strategy,
};
use crate::scalar::Real;

/// Largest supported Gauss-Legendre order.
pub const MAX_GAUSS_LEGENDRE: usize = 64;

/// Errors below this are treated as rounding noise when fitting exponents.
pub const ROUNDING_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureKind {
    Trapezoid,
    Simpson,
    GaussLegendre,
    MonteCarlo,
}

impl QuadratureKind {
    pub const ALL: [QuadratureKind; 4] = [
        QuadratureKind::Trapezoid,
        QuadratureKind::Simpson,
        QuadratureKind::GaussLegendre,
        QuadratureKind::MonteCarlo,
    ];

    /// Samples used by the `n`-panel (or `n`-point) rule.
    pub fn cost(self, n: usize) -> usize {
        match self {
            QuadratureKind::Trapezoid => n + 1,
            QuadratureKind::Simpson => 2 * n + 1,
            QuadratureKind::GaussLegendre | QuadratureKind::MonteCarlo => n,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QuadratureKind::Trapezoid => "trapezoid",
            QuadratureKind::Simpson => "simpson",
            QuadratureKind::GaussLegendre => "gauss-legendre",
            QuadratureKind::MonteCarlo => "monte-carlo",
        }
    }
}

impl FromStr for QuadratureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown quadrature rule '{s}'")))
    }
}

/// A single member `U_n` of one of the quadrature families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub n: usize,
}

impl QuadratureRule {
    pub fn new(kind: QuadratureKind, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::usage("quadrature needs n >= 1"));
        }
        if kind == QuadratureKind::GaussLegendre && n > MAX_GAUSS_LEGENDRE {
            return Err(Error::usage(format!(
                "Gauss-Legendre supports 1..={MAX_GAUSS_LEGENDRE} points, got {n}"
            )));
        }
        Ok(Self { kind, n })
    }

    pub fn cost(&self) -> usize {
        self.kind.cost(self.n)
    }

    /// Nodes and weights on `[0, 1]`; `None` for Monte Carlo.
    pub fn nodes_weights<T: Real>(&self) -> Result<Option<(Vec<T>, Vec<T>)>> {
        let n = self.n;
        let nt = T::lit(n as f64);
        Ok(match self.kind {
            QuadratureKind::Trapezoid => {
                let nodes = (0..=n).map(|i| T::lit(i as f64) / nt).collect();
                let h = T::one() / nt;
                let half = h / T::lit(2.0);
                let weights = (0..=n)
                    .map(|i| if i == 0 || i == n { half } else { h })
                    .collect();
                Some((nodes, weights))
            }
            QuadratureKind::Simpson => {
                let mut nodes = Vec::with_capacity(2 * n + 1);
                let mut weights = Vec::with_capacity(2 * n + 1);
                let six_n = T::lit(6.0) * nt;
                for i in 0..=n {
                    nodes.push(T::lit(i as f64) / nt);
                    let w = if i == 0 || i == n {
                        T::one()
                    } else {
                        T::lit(2.0)
                    };
                    weights.push(w / six_n);
                }
                for i in 1..=n {
                    nodes.push((T::lit(i as f64) - T::lit(0.5)) / nt);
                    weights.push(T::lit(4.0) / six_n);
                }
                Some((nodes, weights))
            }
            QuadratureKind::GaussLegendre => Some(gauss_legendre_rule(n)?),
            QuadratureKind::MonteCarlo => None,
        })
    }

    /// `U_n(f)`; `seed` is required for Monte Carlo only.
    pub fn apply<T: Real>(&self, f: impl Fn(T) -> T, seed: Option<u64>) -> Result<T> {
        match self.kind {
            QuadratureKind::Trapezoid => trapezoid(f, self.n),
            QuadratureKind::Simpson => simpson(f, self.n),
            QuadratureKind::GaussLegendre => gauss_legendre(f, self.n),
            QuadratureKind::MonteCarlo => {
                let seed =
                    seed.ok_or_else(|| Error::usage("Monte Carlo quadrature requires a seed"))?;
                monte_carlo(f, self.n, seed)
            }
        }
    }

    /// The rule as an (algorithm, information) pair.
    pub fn member<T: Real>(&self) -> Result<Member<T>> {
        let domain = (T::zero(), T::one());
        Ok(match self.nodes_weights::<T>()? {
            Some((nodes, weights)) => Member::new(
                Algorithm::WeightedSum(weights),
                InformationOperator::fixed(domain, nodes, NoiseModel::Exact)?,
            ),
            None => Member::new(
                Algorithm::Mean,
                InformationOperator::randomized(domain, self.n, NoiseModel::Exact)?,
            ),
        })
    }
}

fn eval_checked<T: Real>(f: &impl Fn(T) -> T, x: T) -> Result<T> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numeric(format!("integrand is {v} at node x = {x}")))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::usage("quadrature needs n >= 1"))
    } else {
        Ok(())
    }
}

/// Composite trapezoid rule with `n` panels:
/// `(f(0) + f(1) + 2 Σ_{i=1}^{n-1} f(i/n)) / (2n)`.
pub fn trapezoid<T: Real>(f: impl Fn(T) -> T, n: usize) -> Result<T> {
    check_n(n)?;
    let nt = T::lit(n as f64);
    let mut inner = T::zero();
    for i in 1..n {
        inner = inner + eval_checked(&f, T::lit(i as f64) / nt)?;
    }
    let ends = eval_checked(&f, T::zero())? + eval_checked(&f, T::one())?;
    Ok((ends + T::lit(2.0) * inner) / (T::lit(2.0) * nt))
}

/// Composite Simpson rule with `n` panels, each using its midpoint:
/// `(f(0) + f(1) + 4 Σ f((i - 1/2)/n) + 2 Σ f(i/n)) / (6n)`.
pub fn simpson<T: Real>(f: impl Fn(T) -> T, n: usize) -> Result<T> {
    check_n(n)?;
    let nt = T::lit(n as f64);
    let mut mids = T::zero();
    for i in 1..=n {
        mids = mids + eval_checked(&f, (T::lit(i as f64) - T::lit(0.5)) / nt)?;
    }
    let mut inner = T::zero();
    for i in 1..n {
        inner = inner + eval_checked(&f, T::lit(i as f64) / nt)?;
    }
    let ends = eval_checked(&f, T::zero())? + eval_checked(&f, T::one())?;
    Ok((ends + T::lit(4.0) * mids + T::lit(2.0) * inner) / (T::lit(6.0) * nt))
}

/// `n`-point Gauss-Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre<T: Real>(f: impl Fn(T) -> T, n: usize) -> Result<T> {
    let (nodes, weights) = gauss_legendre_rule::<T>(n)?;
    let mut acc = T::zero();
    for (&x, &w) in nodes.iter().zip(&weights) {
        acc = acc + w * eval_checked(&f, x)?;
    }
    Ok(acc)
}

/// Nodes (ascending) and weights of the `n`-point Gauss-Legendre rule on
/// `[0, 1]`, found by Newton iteration on the Legendre polynomial `P_n`.
pub fn gauss_legendre_rule<T: Real>(n: usize) -> Result<(Vec<T>, Vec<T>)> {
    if n == 0 || n > MAX_GAUSS_LEGENDRE {
        return Err(Error::usage(format!(
            "Gauss-Legendre supports 1..={MAX_GAUSS_LEGENDRE} points, got {n}"
        )));
    }
    let tol = T::tol(1e-15);
    let half = T::lit(0.5);
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    // roots are symmetric; solve for the upper half
    for i in 0..n.div_ceil(2) {
        let guess = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut x = T::lit(guess);
        let mut dp = T::one();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x = x - dx;
            if dx.abs() <= tol {
                let (_, d) = legendre_with_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = T::lit(2.0) / ((T::one() - x * x) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[n - 1 - i] = half * (T::one() + x);
        nodes[i] = half * (T::one() - x);
        weights[n - 1 - i] = half * w;
        weights[i] = half * w;
    }
    Ok((nodes, weights))
}

fn legendre_with_derivative<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kt = T::lit(k as f64);
        let p2 = ((T::lit(2.0) * kt - T::one()) * x * p1 - (kt - T::one()) * p0) / kt;
        p0 = p1;
        p1 = p2;
    }
    let (p, pm1) = if n == 0 {
        (T::one(), T::zero())
    } else {
        (p1, p0)
    };
    let nt = T::lit(n as f64);
    let d = nt * (x * p - pm1) / (x * x - T::one());
    (p, d)
}

/// Mean of `f` over `n` uniform nodes drawn from the seeded stream.
pub fn monte_carlo<T: Real>(f: impl Fn(T) -> T, n: usize, seed: u64) -> Result<T> {
    let op = InformationOperator::randomized((T::zero(), T::one()), n, NoiseModel::Exact)?;
    let data = apply_information(&op, f, Some(seed))?;
    Algorithm::Mean.apply(&data.values)
}

/// The strategy `{U_n}` for the given panel counts.
pub fn strategy<T: Real>(kind: QuadratureKind, ns: &[usize]) -> Result<Strategy<T>> {
    let members = ns
        .iter()
        .map(|&n| QuadratureRule::new(kind, n)?.member())
        .collect::<Result<Vec<_>>>()?;
    Ok(Strategy::new(kind.name(), members)?.with_family(kind, ns.to_vec()))
}

/// Fitted `error ≈ constant · n^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExponentFit<T> {
    Fitted {
        exponent: T,
        constant: T,
    },
    /// Every error sits at the rounding floor.
    ExactWithinPrecision,
    /// Only one error above the floor; no slope can be fitted.
    Insufficient,
}

impl<T: Real> ExponentFit<T> {
    pub fn exponent(&self) -> Option<T> {
        match *self {
            ExponentFit::Fitted { exponent, .. } => Some(exponent),
            _ => None,
        }
    }
}

/// Least-squares fit of `log error = log K - α log n`, skipping errors below
/// `floor`.
pub fn fit_power_law<T: Real>(ns: &[T], errors: &[T], floor: T) -> ExponentFit<T> {
    let pts: Vec<(T, T)> = ns
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e >= floor)
        .map(|(&n, &e)| (n.ln(), e.ln()))
        .collect();
    match pts.len() {
        0 => ExponentFit::ExactWithinPrecision,
        1 => ExponentFit::Insufficient,
        _ => {
            let (slope, intercept) = least_squares_line(&pts);
            ExponentFit::Fitted {
                exponent: -slope,
                constant: intercept.exp(),
            }
        }
    }
}

/// Ordinary least-squares `(slope, intercept)` through `(x, y)` pairs.
pub fn least_squares_line<T: Real>(pts: &[(T, T)]) -> (T, T) {
    let m = T::lit(pts.len() as f64);
    let mx = pts.iter().map(|p| p.0).sum::<T>() / m;
    let my = pts.iter().map(|p| p.1).sum::<T>() / m;
    let sxy = pts.iter().map(|&(x, y)| (x - mx) * (y - my)).sum::<T>();
    let sxx = pts.iter().map(|&(x, _)| (x - mx) * (x - mx)).sum::<T>();
    let slope = if sxx > T::zero() {
        sxy / sxx
    } else {
        T::zero()
    };
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport<T> {
    pub rule: QuadratureKind,
    pub ns: Vec<usize>,
    pub errors: Vec<T>,
    pub fit: ExponentFit<T>,
}

impl<T: Real> ConvergenceReport<T> {
    /// CSV with columns `n,error,fitted_exponent,fitted_constant`. The fit is
    /// repeated on every row; an unfitted exponent prints as `exact` or
    /// `insufficient`.
    pub fn to_csv(&self) -> String {
        let (alpha, k) = match self.fit {
            ExponentFit::Fitted { exponent, constant } => (fmt17(exponent), fmt17(constant)),
            ExponentFit::ExactWithinPrecision => ("exact".into(), "exact".into()),
            ExponentFit::Insufficient => ("insufficient".into(), "insufficient".into()),
        };
        let mut out = String::from("n,error,fitted_exponent,fitted_constant\n");
        for (n, e) in self.ns.iter().zip(&self.errors) {
            let _ = writeln!(out, "{n},{},{alpha},{k}", fmt17(*e));
        }
        out
    }
}

/// 17 significant digits, the round-trip precision of `f64`.
pub fn fmt17<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

/// Errors of the `kind` family on `f` at each `n`, and the fitted exponent.
/// Without a `reference`, `S(f)` is taken from the 64-point Gauss-Legendre
/// rule.
pub fn estimate_exponent<T: Real>(
    kind: QuadratureKind,
    f: impl Fn(T) -> T,
    reference: Option<T>,
    ns: &[usize],
    seed: Option<u64>,
) -> Result<ConvergenceReport<T>> {
    if ns.len() < 3 {
        return Err(Error::usage("exponent fit needs at least 3 values of n"));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("ns must be strictly increasing"));
    }
    let exact = match reference {
        Some(r) => r,
        None => gauss_legendre(&f, MAX_GAUSS_LEGENDRE)?,
    };
    let mut errors = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let rule = QuadratureRule::new(kind, n)?;
        let s = seed.map(|s| s.wrapping_add(i as u64));
        errors.push((rule.apply(&f, s)? - exact).abs());
    }
    let nts: Vec<T> = ns.iter().map(|&n| T::lit(n as f64)).collect();
    let fit = fit_power_law(&nts, &errors, T::lit(ROUNDING_FLOOR));
    Ok(ConvergenceReport {
        rule: kind,
        ns: ns.to_vec(),
        errors,
        fit,
    })
}
