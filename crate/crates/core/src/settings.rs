//! Error criteria for integration strategies on `[0, 1]`: worst case over a
//! smoothness ball, average case under an r-fold Wiener measure, ε-complexity,
//! and the induced comparison of strategies.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{sample_mean, Estimate};
use crate::model::{seeded_rng, Member, SeededRng, Strategy};
use crate::quadrature::{
    fit_power_law, least_squares_line, ExponentFit, QuadratureKind, QuadratureRule, ROUNDING_FLOOR,
};

/// `{f ∈ C^r : ‖f^(k)‖∞ <= bound, 0 <= k <= r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessBall {
    pub r: usize,
    pub bound: f64,
}

impl SmoothnessBall {
    pub fn new(r: usize, bound: f64) -> Result<Self> {
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::usage(format!(
                "ball bound must be positive and finite, got {bound}"
            )));
        }
        Ok(Self { r, bound })
    }
}

// ---------------------------------------------------------------------------
// Worst case

/// Degree of the shape polynomial explored by the lower-bound search.
pub const SHAPE_DEGREE: usize = 31;

/// Random-restart local search over bump shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSearch {
    pub restarts: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for BumpSearch {
    fn default() -> Self {
        Self {
            restarts: 4,
            steps: 200,
            seed: 0,
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Bernstein coefficients of the product of two Bernstein polynomials.
fn bernstein_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let (m, n) = (a.len() - 1, b.len() - 1);
    let mut out = vec![0.0; m + n + 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += binomial(m, i) * binomial(n, j) * ai * bj;
        }
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= binomial(m + n, k);
    }
    out
}

/// Bounds `max_u |p^(k)(u)|` on `[0, 1]` for `k = 0..=r` by the largest
/// Bernstein coefficient of each derivative.
fn derivative_bounds(coef: &[f64], r: usize) -> Vec<f64> {
    let mut c = coef.to_vec();
    let mut out = Vec::with_capacity(r + 1);
    for _ in 0..=r {
        out.push(c.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        if c.len() == 1 {
            c = vec![0.0];
        } else {
            let d = (c.len() - 1) as f64;
            c = c.windows(2).map(|w| d * (w[1] - w[0])).collect();
        }
    }
    out
}

/// One gap between consecutive sample points (or domain ends) and the
/// vanishing orders of its bump at either end.
#[derive(Debug, Clone, Copy)]
struct Gap {
    width: f64,
    left: usize,
    right: usize,
}

fn gaps(domain: (f64, f64), nodes: &[f64], r: usize) -> Vec<Gap> {
    let mut pts: Vec<f64> = nodes.to_vec();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let (lo, hi) = domain;
    let order = |x: f64| -> usize {
        let is_node = pts.binary_search_by(|p| p.total_cmp(&x)).is_ok();
        match (is_node, x == lo || x == hi) {
            (false, _) => 0,
            (true, true) => 1,
            (true, false) => r + 1,
        }
    };
    let mut edges = vec![lo];
    edges.extend(pts.iter().copied().filter(|&x| x > lo && x < hi));
    edges.push(hi);
    edges
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| Gap {
            width: w[1] - w[0],
            left: order(w[0]),
            right: order(w[1]),
        })
        .collect()
}

/// `∫ f*` for the sum of per-gap bumps `c_g · u^a (1-u)^b s(u)`, each scaled to
/// the largest `c_g` certified to stay in the ball.
fn bump_integral(gaps: &[Gap], shape: &[f64], ball: &SmoothnessBall) -> f64 {
    let mut cache: Vec<((usize, usize), f64, Vec<f64>)> = Vec::new();
    let mut total = 0.0;
    for g in gaps {
        let key = (g.left, g.right);
        let idx = match cache.iter().position(|(k, ..)| *k == key) {
            Some(i) => i,
            None => {
                let d = g.left + g.right;
                let mut base = vec![0.0; d + 1];
                base[g.left] = 1.0 / binomial(d, g.left);
                let p = bernstein_product(&base, shape);
                let mean = p.iter().sum::<f64>() / p.len() as f64;
                cache.push((key, mean, derivative_bounds(&p, ball.r)));
                cache.len() - 1
            }
        };
        let (_, mean, bounds) = &cache[idx];
        let scale = bounds
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(k, &m)| g.width.powi(k as i32) / m)
            .fold(f64::INFINITY, f64::min);
        if scale.is_finite() {
            total += ball.bound * scale * g.width * mean;
        }
    }
    total
}

fn exact_nodes(member: &Member<f64>) -> Result<&[f64]> {
    let info = &member.information;
    if info.noise().is_active() {
        return Err(Error::Unsupported(
            "worst-case bounds need exact information".into(),
        ));
    }
    info.points().ok_or_else(|| {
        Error::Unsupported("worst-case bounds need deterministic sample points".into())
    })
}

/// Certified lower bound on `sup_{f ∈ ball} |∫f - A(N f)|`, using
/// [`BumpSearch::default`].
pub fn worst_case_error_lower(member: &Member<f64>, ball: &SmoothnessBall) -> Result<f64> {
    worst_case_error_lower_with(member, ball, &BumpSearch::default())
}

/// Error on the scaled monomials `c·(x - lo)^d`, `d <= r + 2`, the largest
/// multiples that stay in the ball, and their negatives.
fn monomial_probes(member: &Member<f64>, ball: &SmoothnessBall) -> Result<f64> {
    let (lo, hi) = member.information.domain();
    let len = hi - lo;
    let mut best: f64 = 0.0;
    for d in 0..=ball.r + 2 {
        // sup of the j-th derivative of (x - lo)^d over the domain
        let peak = (0..=d.min(ball.r))
            .map(|j| (d - j + 1..=d).map(|v| v as f64).product::<f64>() * len.powi((d - j) as i32))
            .fold(0.0, f64::max);
        let c = ball.bound / peak;
        let exact = c * len.powi(d as i32 + 1) / (d + 1) as f64;
        for sign in [1.0, -1.0] {
            let approx = member.run(|x| sign * c * (x - lo).powi(d as i32), None)?;
            best = best.max((sign * exact - approx).abs());
        }
    }
    Ok(best)
}

/// Lower bound from explicit members of the ball: scaled monomials, and
/// functions vanishing at every sample point.
///
/// On each gap between samples the candidate is `c · u^a (1-u)^b s(u)`, with
/// `a`, `b` the orders needed to glue in `C^r` (0 at a free domain end, 1 at a
/// sampled domain end, `r + 1` at interior samples) and `s` a degree-31
/// Bernstein shape. `c` is the largest scale for which Bernstein coefficient
/// bounds certify `‖f^(k)‖∞ <= bound`. Such `f` produce the same data as the
/// zero function, so the error is `|∫f| + |A(0)|` for `f` or `-f`. The shape
/// starts constant and is improved by seeded random-restart hill climbing.
pub fn worst_case_error_lower_with(
    member: &Member<f64>,
    ball: &SmoothnessBall,
    search: &BumpSearch,
) -> Result<f64> {
    let nodes = exact_nodes(member)?;
    let gaps = gaps(member.information.domain(), nodes, ball.r);
    let a0 = member.algorithm.apply(&vec![0.0; nodes.len()])?.abs();

    let mut best_shape = vec![1.0; SHAPE_DEGREE + 1];
    let mut best = bump_integral(&gaps, &best_shape, ball).abs();
    let mut rng = seeded_rng(search.seed);
    for restart in 0..search.restarts {
        let mut shape = best_shape.clone();
        if restart > 0 {
            for v in &mut shape {
                *v += 0.3 * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let mut value = bump_integral(&gaps, &shape, ball).abs();
        let mut step = 0.5;
        for _ in 0..search.steps {
            let j = rng.random_range(0..shape.len());
            let delta = step * rng.sample::<f64, _>(StandardNormal);
            shape[j] += delta;
            let v = bump_integral(&gaps, &shape, ball).abs();
            if v > value {
                value = v;
            } else {
                shape[j] -= delta;
                step *= 0.98;
            }
        }
        if value > best {
            best = value;
            best_shape = shape;
        }
    }
    Ok((best + a0).max(monomial_probes(member, ball)?))
}

/// Analytic error bound of a composite rule on the ball.
pub fn worst_case_error_upper(rule: &QuadratureRule, ball: &SmoothnessBall) -> Result<f64> {
    let n = rule.n as f64;
    match rule.kind {
        QuadratureKind::Trapezoid if ball.r >= 2 => Ok(ball.bound / (12.0 * n * n)),
        QuadratureKind::Simpson if ball.r >= 4 => Ok(ball.bound / (2880.0 * n.powi(4))),
        QuadratureKind::Trapezoid | QuadratureKind::Simpson => Err(Error::usage(format!(
            "{} error bound needs r >= {}, got r = {}",
            rule.kind.name(),
            if rule.kind == QuadratureKind::Trapezoid {
                2
            } else {
                4
            },
            ball.r
        ))),
        other => Err(Error::usage(format!(
            "no analytic error bound for {}",
            other.name()
        ))),
    }
}

// ---------------------------------------------------------------------------
// Average case

/// Brownian motion on `[0, 1]` integrated `fold` times, sampled on a uniform
/// grid of `grid_size` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WienerMeasure {
    pub fold: usize,
    #[serde(default = "WienerMeasure::default_grid")]
    pub grid_size: usize,
}

/// A sampled path, read off by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    values: Vec<f64>,
}

impl Path {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m = self.values.len() - 1;
        let x = t.clamp(0.0, 1.0) * m as f64;
        let i = (x.floor() as usize).min(m - 1);
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Exact integral of the interpolant.
    pub fn integral(&self) -> f64 {
        let m = self.values.len() - 1;
        let inner: f64 = self.values[1..m].iter().sum();
        (inner + 0.5 * (self.values[0] + self.values[m])) / m as f64
    }
}

impl WienerMeasure {
    pub const DEFAULT_GRID: usize = 4096;

    fn default_grid() -> usize {
        Self::DEFAULT_GRID
    }

    pub fn new(fold: usize, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::usage("Wiener grid needs at least 2 points"));
        }
        Ok(Self { fold, grid_size })
    }

    /// Random walk with `N(0, h)` increments, then `fold` cumulative
    /// trapezoid integrations.
    pub fn sample_path(&self, rng: &mut impl Rng) -> Path {
        let m = self.grid_size - 1;
        let h = 1.0 / m as f64;
        let sd = h.sqrt();
        let mut v = Vec::with_capacity(m + 1);
        v.push(0.0);
        for i in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            v.push(v[i] + sd * z);
        }
        for _ in 0..self.fold {
            let mut acc = 0.0;
            let mut next = Vec::with_capacity(m + 1);
            next.push(0.0);
            for w in v.windows(2) {
                acc += 0.5 * h * (w[0] + w[1]);
                next.push(acc);
            }
            v = next;
        }
        Path { values: v }
    }

    /// Generator for path `i` of the run seeded with `seed`; independent of
    /// how paths are scheduled across threads.
    fn path_rng(seed: u64, i: usize) -> SeededRng {
        let mut rng = seeded_rng(seed);
        rng.set_stream(i as u64);
        rng
    }

    /// Monte Carlo estimates of `E f(s) f(t)` for each pair.
    pub fn covariance(&self, pairs: &[(f64, f64)], paths: usize, seed: u64) -> Vec<Estimate<f64>> {
        let products: Vec<Vec<f64>> = (0..paths)
            .into_par_iter()
            .map(|i| {
                let p = self.sample_path(&mut Self::path_rng(seed, i));
                pairs.iter().map(|&(s, t)| p.eval(s) * p.eval(t)).collect()
            })
            .collect();
        (0..pairs.len())
            .map(|k| sample_mean(products.iter().map(|row| row[k])))
            .collect()
    }
}

/// Smallest accepted trial count for [`average_case_error`].
pub const MIN_TRIALS: usize = 100;

/// Mean of `|∫f - U(f)|` over seeded paths, with its standard error.
///
/// Paths live on the measure's grid; the member samples their piecewise
/// linear interpolant. The grid must have at least as many intervals as the
/// member takes samples.
pub fn average_case_error(
    member: &Member<f64>,
    measure: &WienerMeasure,
    trials: usize,
    seed: u64,
) -> Result<Estimate<f64>> {
    if trials < MIN_TRIALS {
        return Err(Error::usage(format!(
            "need at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if measure.grid_size < 2 {
        return Err(Error::usage("Wiener grid needs at least 2 points"));
    }
    if measure.grid_size - 1 < member.cost() {
        return Err(Error::usage(format!(
            "grid of {} points is coarser than the {} samples of the member",
            measure.grid_size,
            member.cost()
        )));
    }
    if member.information.domain() != (0.0, 1.0) {
        return Err(Error::Unsupported("Wiener paths live on [0, 1]".into()));
    }
    let errors = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = WienerMeasure::path_rng(seed, i);
            let path = measure.sample_path(&mut rng);
            let info_seed = member.information.requires_seed().then(|| rng.next_u64());
            let u = member.run(|t| path.eval(t), info_seed)?;
            Ok((path.integral() - u).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sample_mean(errors.into_iter()))
}

// ---------------------------------------------------------------------------
// Complexity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityProfile {
    pub rule: QuadratureKind,
    pub ball: SmoothnessBall,
    pub epsilons: Vec<f64>,
    /// Smallest `n` whose error bound is at most ε.
    pub ns: Vec<usize>,
    /// Samples used by that member.
    pub costs: Vec<usize>,
    /// ε is met already by the smallest member, so the cost is saturated.
    pub saturated: Vec<bool>,
    /// Least-squares slope of `ln cost` against `ln(1/ε)` over unsaturated
    /// entries.
    pub slope: Option<f64>,
}

impl ComplexityProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epsilon,n,cost,saturated\n");
        for i in 0..self.epsilons.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                crate::quadrature::fmt17(self.epsilons[i]),
                self.ns[i],
                self.costs[i],
                self.saturated[i]
            ));
        }
        out
    }
}

fn minimal_n(rule: QuadratureKind, ball: &SmoothnessBall, eps: f64) -> Result<usize> {
    let bound = |n: usize| worst_case_error_upper(&QuadratureRule { kind: rule, n }, ball);
    let p = if rule == QuadratureKind::Trapezoid {
        2.0
    } else {
        4.0
    };
    let c = if rule == QuadratureKind::Trapezoid {
        12.0
    } else {
        2880.0
    };
    let guess = (ball.bound / (c * eps)).powf(1.0 / p).ceil();
    if !(guess < 1e15) {
        return Err(Error::usage(format!(
            "ε = {eps} needs an astronomically large rule"
        )));
    }
    let mut n = (guess as usize).max(1);
    while bound(n)? > eps {
        n += 1;
    }
    while n > 1 && bound(n - 1)? <= eps {
        n -= 1;
    }
    Ok(n)
}

/// `comp(U, ε)` for each ε from the analytic error bound.
pub fn complexity(
    rule: QuadratureKind,
    ball: &SmoothnessBall,
    epsilons: &[f64],
) -> Result<ComplexityProfile> {
    if epsilons.is_empty() {
        return Err(Error::usage("no tolerances given"));
    }
    if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::usage("tolerances must be positive and finite"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::usage("tolerances must be strictly decreasing"));
    }
    worst_case_error_upper(&QuadratureRule { kind: rule, n: 1 }, ball)?;
    let ns = epsilons
        .iter()
        .map(|&e| minimal_n(rule, ball, e))
        .collect::<Result<Vec<_>>>()?;
    let costs: Vec<usize> = ns.iter().map(|&n| rule.cost(n)).collect();
    let first = worst_case_error_upper(&QuadratureRule { kind: rule, n: 1 }, ball)?;
    let saturated: Vec<bool> = epsilons.iter().map(|&e| e >= first).collect();
    let pts: Vec<(f64, f64)> = (0..epsilons.len())
        .filter(|&i| !saturated[i])
        .map(|i| ((1.0 / epsilons[i]).ln(), (costs[i] as f64).ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| least_squares_line(&pts).0);
    Ok(ComplexityProfile {
        rule,
        ball: *ball,
        epsilons: epsilons.to_vec(),
        ns,
        costs,
        saturated,
        slope,
    })
}

// ---------------------------------------------------------------------------
// Comparison

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Criterion {
    /// Convergence exponent on `e^x`, measured against cost.
    Exponent,
    /// Certified worst-case lower bounds at matched cost.
    WorstCase { ball: SmoothnessBall },
    AverageCase {
        measure: WienerMeasure,
        trials: usize,
        seed: u64,
    },
    /// Growth of the complexity ratio over the three smallest tolerances.
    Complexity {
        ball: SmoothnessBall,
        epsilons: Vec<f64>,
    },
}

impl Criterion {
    pub fn name(&self) -> &'static str {
        match self {
            Criterion::Exponent => "exponent",
            Criterion::WorstCase { .. } => "worst-case",
            Criterion::AverageCase { .. } => "average-case",
            Criterion::Complexity { .. } => "complexity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    FirstNotWorse,
    SecondNotWorse,
    Equivalent,
    Incomparable,
}

impl Outcome {
    fn from_relations(first: bool, second: bool) -> Self {
        match (first, second) {
            (true, true) => Outcome::Equivalent,
            (true, false) => Outcome::FirstNotWorse,
            (false, true) => Outcome::SecondNotWorse,
            (false, false) => Outcome::Incomparable,
        }
    }

    /// Whether the first strategy is not worse than the second.
    pub fn first_not_worse(self) -> bool {
        matches!(self, Outcome::FirstNotWorse | Outcome::Equivalent)
    }

    pub fn second_not_worse(self) -> bool {
        matches!(self, Outcome::SecondNotWorse | Outcome::Equivalent)
    }
}

/// One compared quantity: `key` is the cost, tolerance, or 0 for a single
/// summary number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRow {
    pub key: f64,
    pub first: f64,
    pub second: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonVerdict {
    pub outcome: Outcome,
    pub criterion: String,
    pub first: String,
    pub second: String,
    pub key: String,
    pub rows: Vec<EvidenceRow>,
}

impl ComparisonVerdict {
    pub fn to_csv(&self) -> String {
        let mut out = format!("criterion,{},{},{}\n", self.key, self.first, self.second);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.criterion,
                crate::quadrature::fmt17(r.key),
                crate::quadrature::fmt17(r.first),
                crate::quadrature::fmt17(r.second)
            ));
        }
        out.push_str(&format!("outcome,{:?}\n", self.outcome));
        out
    }
}

/// Exponents closer than this are considered equal.
pub const EXPONENT_TOLERANCE: f64 = 0.1;

/// A complexity ratio counts as bounded when its log-log slope in `1/ε` is
/// below this.
pub const RATIO_SLOPE_TOLERANCE: f64 = 0.1;

fn exponent_of(s: &Strategy<f64>) -> Result<f64> {
    let (lo, hi) = s.members()[0].information.domain();
    let exact = hi.exp() - lo.exp();
    let mut costs = Vec::new();
    let mut errors = Vec::new();
    for (i, m) in s.members().iter().enumerate() {
        let seed = m.information.requires_seed().then_some(i as u64);
        costs.push(m.cost() as f64);
        errors.push((m.run(f64::exp, seed)? - exact).abs());
    }
    match fit_power_law(&costs, &errors, ROUNDING_FLOOR) {
        ExponentFit::Fitted { exponent, .. } => Ok(exponent),
        ExponentFit::ExactWithinPrecision => Ok(f64::INFINITY),
        ExponentFit::Insufficient => Err(Error::usage(format!(
            "strategy {} has too few members above rounding level to fit an exponent",
            s.name()
        ))),
    }
}

/// Best error achievable within each budget, from `(cost, error)` pairs.
fn best_within(points: &[(usize, f64)], budget: usize) -> Option<f64> {
    points
        .iter()
        .filter(|(c, _)| *c <= budget)
        .map(|p| p.1)
        .fold(None, |m, e| Some(m.map_or(e, |m: f64| m.min(e))))
}

fn matched_cost_rows(a: &[(usize, f64)], b: &[(usize, f64)]) -> Vec<EvidenceRow> {
    let mut costs: Vec<usize> = a.iter().chain(b).map(|p| p.0).collect();
    costs.sort_unstable();
    costs.dedup();
    costs
        .into_iter()
        .filter_map(|c| {
            Some(EvidenceRow {
                key: c as f64,
                first: best_within(a, c)?,
                second: best_within(b, c)?,
            })
        })
        .collect()
}

/// `U1 ≺ U2` and `U2 ≺ U1` under `criterion`, with the numbers compared.
///
/// Error-based criteria compare the best error reachable within each budget
/// at every cost where both strategies have a member; "not worse" must hold at
/// every such cost.
pub fn compare(
    u1: &Strategy<f64>,
    u2: &Strategy<f64>,
    criterion: &Criterion,
) -> Result<ComparisonVerdict> {
    let (rows, key, first, second) = match criterion {
        Criterion::Exponent => {
            let (a1, a2) = (exponent_of(u1)?, exponent_of(u2)?);
            let row = EvidenceRow {
                key: 0.0,
                first: a1,
                second: a2,
            };
            let eq = a1 == a2 || (a1 - a2).abs() <= EXPONENT_TOLERANCE;
            (vec![row], "exponent", a1 >= a2 || eq, a2 >= a1 || eq)
        }
        Criterion::WorstCase { ball } => {
            let pts = |s: &Strategy<f64>| -> Result<Vec<(usize, f64)>> {
                s.members()
                    .iter()
                    .map(|m| Ok((m.cost(), worst_case_error_lower(m, ball)?)))
                    .collect()
            };
            let rows = matched_cost_rows(&pts(u1)?, &pts(u2)?);
            let le = |x: f64, y: f64| x <= y * (1.0 + 1e-9) + 1e-15;
            let f = rows.iter().all(|r| le(r.first, r.second));
            let s = rows.iter().all(|r| le(r.second, r.first));
            (rows, "cost", f, s)
        }
        Criterion::AverageCase {
            measure,
            trials,
            seed,
        } => {
            let pts = |s: &Strategy<f64>| -> Result<Vec<(usize, Estimate<f64>)>> {
                s.members()
                    .iter()
                    .map(|m| Ok((m.cost(), average_case_error(m, measure, *trials, *seed)?)))
                    .collect()
            };
            let (p1, p2) = (pts(u1)?, pts(u2)?);
            let means = |p: &[(usize, Estimate<f64>)]| {
                p.iter().map(|(c, e)| (*c, e.mean)).collect::<Vec<_>>()
            };
            let rows = matched_cost_rows(&means(&p1), &means(&p2));
            // standard errors of the members that attained each compared mean
            let se = |p: &[(usize, Estimate<f64>)], mean: f64| {
                p.iter()
                    .find(|(_, e)| e.mean == mean)
                    .map_or(0.0, |(_, e)| e.std_error)
            };
            let slack = |r: &EvidenceRow| 3.0 * se(&p1, r.first).hypot(se(&p2, r.second));
            let f = rows.iter().all(|r| r.first <= r.second + slack(r));
            let s = rows.iter().all(|r| r.second <= r.first + slack(r));
            (rows, "cost", f, s)
        }
        Criterion::Complexity { ball, epsilons } => {
            let kind = |s: &Strategy<f64>| {
                s.family().map(|(k, _)| k).ok_or_else(|| {
                    Error::usage(format!(
                        "complexity needs a built-in quadrature family, {} is not one",
                        s.name()
                    ))
                })
            };
            if epsilons.len() < 3 {
                return Err(Error::usage(
                    "complexity comparison needs at least three tolerances",
                ));
            }
            let tail = &epsilons[epsilons.len() - 3..];
            let c1 = complexity(kind(u1)?, ball, tail)?;
            let c2 = complexity(kind(u2)?, ball, tail)?;
            let rows: Vec<EvidenceRow> = (0..3)
                .map(|i| EvidenceRow {
                    key: tail[i],
                    first: c1.costs[i] as f64,
                    second: c2.costs[i] as f64,
                })
                .collect();
            let slope = |num: fn(&EvidenceRow) -> f64, den: fn(&EvidenceRow) -> f64| {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .map(|r| ((1.0 / r.key).ln(), (num(r) / den(r)).ln()))
                    .collect();
                least_squares_line(&pts).0
            };
            let f = slope(|r| r.first, |r| r.second) <= RATIO_SLOPE_TOLERANCE;
            let s = slope(|r| r.second, |r| r.first) <= RATIO_SLOPE_TOLERANCE;
            (rows, "epsilon", f, s)
        }
    };
    if rows.is_empty() {
        return Err(Error::usage("the strategies share no comparable cost"));
    }
    Ok(ComparisonVerdict {
        outcome: Outcome::from_relations(first, second),
        criterion: criterion.name().into(),
        first: u1.name().into(),
        second: u2.name().into(),
        key: key.into(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::strategy;

    fn member(kind: QuadratureKind, n: usize) -> Member<f64> {
        QuadratureRule::new(kind, n).unwrap().member().unwrap()
    }

    #[test]
    fn parabola_bump() {
        let ball = SmoothnessBall::new(2, 1.0).unwrap();
        let m = member(QuadratureKind::Trapezoid, 1);
        let plain = worst_case_error_lower_with(
            &m,
            &ball,
            &BumpSearch {
                restarts: 0,
                steps: 0,
                seed: 0,
            },
        )
        .unwrap();
        assert!((plain - 1.0 / 12.0).abs() < 1e-13, "{plain}");
        let lo = worst_case_error_lower(&m, &ball).unwrap();
        let hi = worst_case_error_upper(
            &QuadratureRule::new(QuadratureKind::Trapezoid, 1).unwrap(),
            &ball,
        )
        .unwrap();
        assert!(lo >= 1.0 / 16.0 && lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn upper_bounds() {
        let ball = SmoothnessBall::new(4, 1.0).unwrap();
        let t = worst_case_error_upper(
            &QuadratureRule::new(QuadratureKind::Trapezoid, 10).unwrap(),
            &ball,
        )
        .unwrap();
        assert!((t - 1.0 / 1200.0).abs() < 1e-18);
        let s = worst_case_error_upper(
            &QuadratureRule::new(QuadratureKind::Simpson, 10).unwrap(),
            &ball,
        )
        .unwrap();
        assert!((s - 1.0 / 2.88e7).abs() < 1e-20);
        let low = SmoothnessBall::new(3, 1.0).unwrap();
        assert!(worst_case_error_upper(
            &QuadratureRule::new(QuadratureKind::Simpson, 10).unwrap(),
            &low
        )
        .is_err());
        assert!(worst_case_error_upper(
            &QuadratureRule::new(QuadratureKind::GaussLegendre, 4).unwrap(),
            &ball
        )
        .is_err());
    }

    #[test]
    fn randomized_member_unsupported() {
        let ball = SmoothnessBall::new(2, 1.0).unwrap();
        let m = member(QuadratureKind::MonteCarlo, 10);
        assert!(matches!(
            worst_case_error_lower(&m, &ball),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn gaps_orders() {
        let g = gaps((0.0, 1.0), &[0.0, 0.5], 2);
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].left, g[0].right, g[1].left, g[1].right), (1, 3, 3, 0));
        let g = gaps((0.0, 1.0), &[], 2);
        assert_eq!((g[0].left, g[0].right), (0, 0));
    }

    #[test]
    fn path_properties() {
        let w = WienerMeasure::new(1, 65).unwrap();
        let p = w.sample_path(&mut seeded_rng(1));
        assert_eq!(p.values()[0], 0.0);
        assert_eq!(p.values().len(), 65);
        let zero = Path {
            values: vec![0.0; 9],
        };
        assert_eq!(zero.integral(), 0.0);
        let line = Path {
            values: (0..5).map(|i| i as f64 / 4.0).collect(),
        };
        assert!((line.eval(0.3) - 0.3).abs() < 1e-15 && (line.integral() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn average_case_checks() {
        let w = WienerMeasure::new(0, 8).unwrap();
        let m = member(QuadratureKind::Trapezoid, 16);
        assert!(average_case_error(&m, &w, 100, 0).is_err());
        assert!(average_case_error(&member(QuadratureKind::Trapezoid, 2), &w, 10, 0).is_err());
        let e = average_case_error(&member(QuadratureKind::Trapezoid, 2), &w, 200, 0).unwrap();
        assert!(e.mean > 0.0 && e.std_error > 0.0);
    }

    #[test]
    fn complexity_profile() {
        let ball = SmoothnessBall::new(4, 1.0).unwrap();
        let p = complexity(QuadratureKind::Trapezoid, &ball, &[1e-2, 1e-4]).unwrap();
        assert_eq!(p.ns, vec![3, 29]);
        assert_eq!(p.costs, vec![4, 30]);
        let big = complexity(QuadratureKind::Simpson, &ball, &[1e6]).unwrap();
        assert_eq!(big.ns, vec![1]);
        assert!(big.saturated[0]);
        assert!(complexity(QuadratureKind::Trapezoid, &ball, &[1e-4, 1e-2]).is_err());
        assert!(complexity(QuadratureKind::MonteCarlo, &ball, &[1e-2]).is_err());
    }

    #[test]
    fn reflexive() {
        let t = strategy::<f64>(QuadratureKind::Trapezoid, &[2, 4, 8]).unwrap();
        let v = compare(&t, &t, &Criterion::Exponent).unwrap();
        assert_eq!(v.outcome, Outcome::Equivalent);
        let ball = SmoothnessBall::new(2, 1.0).unwrap();
        let v = compare(&t, &t, &Criterion::WorstCase { ball }).unwrap();
        assert_eq!(v.outcome, Outcome::Equivalent);
    }
}
