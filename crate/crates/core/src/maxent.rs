//! Recovering a discrete distribution from linear moment data `y = M p`.
//!
//! Three selections from the feasible polytope
//! `F(y) = {p in the simplex : M p = y}`:
//! maximum entropy (exponential-family dual solved by damped Newton), the
//! Euclidean Chebyshev center (exact vertex enumeration + minimal enclosing
//! ball), and a point of minimal uniform norm (bisection with LP feasibility).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{diameter, dist, min_enclosing_ball};
use crate::linalg::{dot, independent_rows, solve_dense, Dense};
use crate::lp::{minimize, LpOutcome};
use crate::scalar::Real;

/// Largest category count accepted by the enumeration-based solvers.
pub const MAX_ENUMERATION_CATEGORIES: usize = 12;

/// Newton iteration cap for [`maxent_solve`].
pub const MAX_NEWTON_ITERATIONS: usize = 200;

/// A probability vector; tiny negative entries from rounding are clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector<T>(Vec<T>);

impl<T: Real> ProbVector<T> {
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::usage("empty probability vector"));
        }
        if let Some(v) = p.iter().find(|v| !(**v >= -T::lit(1e-12))) {
            return Err(Error::usage(format!("negative probability {v}")));
        }
        let p: Vec<T> = p.into_iter().map(|v| v.max(T::zero())).collect();
        let sum: T = p.iter().copied().sum();
        if (sum - T::one()).abs() > T::tol(1e-10) {
            return Err(Error::usage(format!("probabilities sum to {sum}")));
        }
        Ok(Self(p))
    }

    /// Clamps negatives and renormalizes; used for solver output whose
    /// constraint residual is already certified.
    fn from_solver(p: Vec<T>) -> Self {
        let p: Vec<T> = p.into_iter().map(|v| v.max(T::zero())).collect();
        Self(p)
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![T::one() / T::lit(m as f64); m])
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }
}

/// `H(p) = -Σ p_i ln p_i` in nats, with `0 ln 0 = 0`.
pub fn entropy<T: Real>(p: &ProbVector<T>) -> T {
    -p.0.iter()
        .filter(|&&v| v > T::zero())
        .map(|&v| v * v.ln())
        .sum::<T>()
}

/// JSON form `{m, rows, y}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord<T> {
    pub m: usize,
    #[serde(default)]
    pub rows: Vec<Vec<T>>,
    #[serde(default)]
    pub y: Vec<T>,
}

/// Moment data `M p = y` with `M` of size `n × m`, `n < m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentConstraints<T> {
    m: usize,
    rows: Vec<Vec<T>>,
    y: Vec<T>,
    /// `[1ᵀ; M]` and `[1; y]`, the full equality system on the simplex.
    system: Dense<T>,
    rhs: Vec<T>,
}

impl<T: Real> MomentConstraints<T> {
    /// Validates shapes and rank and checks that `F(y)` is nonempty.
    pub fn new(m: usize, rows: Vec<Vec<T>>, y: Vec<T>) -> Result<Self> {
        if m == 0 {
            return Err(Error::usage("need at least one category"));
        }
        if rows.len() != y.len() {
            return Err(Error::usage(format!(
                "{} moment rows but {} observations",
                rows.len(),
                y.len()
            )));
        }
        if rows.len() >= m {
            return Err(Error::usage(format!(
                "need fewer moment rows than categories ({} >= {m})",
                rows.len()
            )));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != m) {
            return Err(Error::usage(format!(
                "row {i} has {} entries, expected {m}",
                rows.len()
            )));
        }
        if rows.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::usage("moment data must be finite"));
        }
        let mut full = vec![vec![T::one(); m]];
        full.extend(rows.iter().cloned());
        let tol = T::tol(1e-10);
        if independent_rows(&rows, tol).len() != rows.len() {
            return Err(Error::usage("moment rows are linearly dependent"));
        }
        if independent_rows(&full, tol).len() != full.len() {
            return Err(Error::usage(
                "a moment row is a combination of the normalization row",
            ));
        }
        let mut rhs = vec![T::one()];
        rhs.extend(y.iter().copied());
        let system = Dense::from_rows(&full);
        let c = Self {
            m,
            rows,
            y,
            system,
            rhs,
        };
        match minimize(&vec![T::zero(); m], &c.system, &c.rhs, T::tol(1e-11))? {
            LpOutcome::Infeasible { residual } => Err(Error::Infeasible {
                what: "no probability vector matches the moments".into(),
                residual: residual.to_f64_lossy(),
            }),
            _ => Ok(c),
        }
    }

    pub fn from_record(r: MomentRecord<T>) -> Result<Self> {
        Self::new(r.m, r.rows, r.y)
    }

    pub fn to_record(&self) -> MomentRecord<T> {
        MomentRecord {
            m: self.m,
            rows: self.rows.clone(),
            y: self.y.clone(),
        }
    }

    pub fn categories(&self) -> usize {
        self.m
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    /// `max_k |(M p)_k - y_k|`.
    pub fn residual(&self, p: &[T]) -> T {
        self.rows
            .iter()
            .zip(&self.y)
            .map(|(r, &y)| (dot(r, p) - y).abs())
            .fold(T::zero(), T::max)
    }

    /// Columns permuted: category `i` of the result is category `perm[i]`
    /// of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .map(|r| perm.iter().map(|&j| r[j]).collect())
            .collect();
        Self::new(self.m, rows, self.y.clone())
    }

    fn max_coordinate(&self, i: usize) -> Result<T> {
        let mut c = vec![T::zero(); self.m];
        c[i] = -T::one();
        match minimize(&c, &self.system, &self.rhs, T::tol(1e-11))? {
            LpOutcome::Optimal { value, .. } => Ok(-value),
            _ => Err(Error::numeric("support LP failed on a feasible instance")),
        }
    }

    /// Categories that carry positive mass somewhere in `F(y)`.
    fn support(&self) -> Result<Vec<usize>> {
        let mut s = Vec::new();
        for i in 0..self.m {
            if self.max_coordinate(i)? > T::tol(1e-10) {
                s.push(i);
            }
        }
        Ok(s)
    }

    fn check_enumerable(&self) -> Result<()> {
        if self.m > MAX_ENUMERATION_CATEGORIES {
            Err(Error::Scale(format!(
                "{} categories exceed the enumeration limit of {MAX_ENUMERATION_CATEGORIES}",
                self.m
            )))
        } else {
            Ok(())
        }
    }

    /// Vertices of `F(y)`, or of `F(y) ∩ {p_i <= cap}` when `cap` is given.
    pub fn vertices(&self, cap: Option<T>) -> Result<Vec<Vec<T>>> {
        self.check_enumerable()?;
        let r = self.system.rows;
        let m = self.m;
        let tol = T::tol(1e-10);
        let mut out: Vec<Vec<T>> = Vec::new();
        for basis in combinations(m, r) {
            let nonbasic: Vec<usize> = (0..m).filter(|j| !basis.contains(j)).collect();
            let sub = self.system.select_cols(&basis);
            let assignments = if cap.is_some() {
                1usize << nonbasic.len()
            } else {
                1
            };
            for mask in 0..assignments {
                let mut p = vec![T::zero(); m];
                if let Some(u) = cap {
                    for (k, &j) in nonbasic.iter().enumerate() {
                        if mask >> k & 1 == 1 {
                            p[j] = u;
                        }
                    }
                }
                let b: Vec<T> = (0..r)
                    .map(|i| self.rhs[i] - dot(self.system.row(i), &p))
                    .collect();
                let Some(xb) = solve_dense(&sub, &b, T::tol(1e-12)) else {
                    break;
                };
                let upper = cap.unwrap_or(T::one());
                if xb.iter().all(|&v| v >= -tol && v <= upper + tol) {
                    for (&j, &v) in basis.iter().zip(&xb) {
                        p[j] = v.max(T::zero()).min(upper);
                    }
                    if !out.iter().any(|q| dist(q, &p) <= T::tol(1e-8)) {
                        out.push(p);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxEntSolution<T> {
    pub p: ProbVector<T>,
    /// Some categories are forced to zero: the maximizer sits on the
    /// boundary of the simplex.
    pub boundary: bool,
    pub iterations: usize,
    /// `‖M p - y‖∞`.
    pub residual: T,
}

fn log_sum_exp<T: Real>(z: &[T]) -> T {
    let zmax = z.iter().copied().fold(T::neg_infinity(), T::max);
    zmax + z.iter().map(|&v| (v - zmax).exp()).sum::<T>().ln()
}

/// Maximum-entropy element of `F(y)`.
///
/// Solves the dual `min_θ log Σ_i exp((Mᵀθ)_i) - θᵀy` by Newton's method with
/// step halving, starting from `θ = 0` (the uniform distribution), until
/// `‖M p - y‖∞ <= 1e-9`. Categories that are zero on all of `F(y)` are
/// removed first and the dual is solved on the remaining support.
pub fn maxent_solve<T: Real>(c: &MomentConstraints<T>) -> Result<MaxEntSolution<T>> {
    let support = c.support()?;
    if support.is_empty() {
        return Err(Error::numeric("feasible set has empty support"));
    }
    // rows restricted to the support, minus those implied by normalization
    let mut reduced = vec![vec![T::one(); support.len()]];
    reduced.extend(
        c.rows
            .iter()
            .map(|r| support.iter().map(|&j| r[j]).collect::<Vec<T>>()),
    );
    let keep: Vec<usize> = independent_rows(&reduced, T::tol(1e-10))
        .into_iter()
        .filter(|&i| i > 0)
        .map(|i| i - 1)
        .collect();
    let a: Vec<&Vec<T>> = keep.iter().map(|&i| &reduced[i + 1]).collect();
    let y: Vec<T> = keep.iter().map(|&i| c.y[i]).collect();
    let k = a.len();
    let s = support.len();
    let tol = T::tol(1e-9);

    let primal = |theta: &[T]| -> (Vec<T>, T) {
        let z: Vec<T> = (0..s)
            .map(|j| (0..k).map(|r| theta[r] * a[r][j]).sum())
            .collect();
        let lse = log_sum_exp(&z);
        let p = z.iter().map(|&v| (v - lse).exp()).collect();
        let dual = lse - dot(theta, &y);
        (p, dual)
    };

    let mut theta = vec![T::zero(); k];
    let (mut p, mut dual) = primal(&theta);
    let mut iterations = 0;
    loop {
        let grad: Vec<T> = (0..k).map(|r| dot(a[r], &p) - y[r]).collect();
        let resid = grad.iter().fold(T::zero(), |m, g| m.max(g.abs()));
        if resid <= tol {
            break;
        }
        if iterations == MAX_NEWTON_ITERATIONS {
            return Err(Error::Convergence {
                iterations,
                residual: resid.to_f64_lossy(),
            });
        }
        iterations += 1;

        let mean: Vec<T> = (0..k).map(|r| dot(a[r], &p)).collect();
        let mut hess = Dense::zeros(k, k);
        for r in 0..k {
            for q in r..k {
                let v = (0..s).map(|j| p[j] * a[r][j] * a[q][j]).sum::<T>() - mean[r] * mean[q];
                hess.set(r, q, v);
                hess.set(q, r, v);
            }
        }
        let neg: Vec<T> = grad.iter().map(|&g| -g).collect();
        let step = match solve_dense(&hess, &neg, T::tol(1e-15)) {
            Some(d) => d,
            None => {
                let ridge = (0..k).map(|r| hess.get(r, r)).sum::<T>() * T::tol(1e-12)
                    + T::min_positive_value();
                for r in 0..k {
                    hess.set(r, r, hess.get(r, r) + ridge);
                }
                solve_dense(&hess, &neg, T::zero())
                    .ok_or_else(|| Error::numeric("singular dual Hessian"))?
            }
        };
        let slope = dot(&grad, &step);
        let mut t = T::one();
        loop {
            let trial: Vec<T> = theta
                .iter()
                .zip(&step)
                .map(|(&th, &d)| th + t * d)
                .collect();
            let (tp, td) = primal(&trial);
            // near the optimum the dual decrease drowns in rounding; a
            // smaller gradient is then the better acceptance signal
            let trial_resid = (0..k)
                .map(|r| (dot(a[r], &tp) - y[r]).abs())
                .fold(T::zero(), T::max);
            if td <= dual + T::lit(1e-4) * t * slope
                || (resid <= T::tol(1e-6) && trial_resid < resid)
                || t < T::lit(1e-10)
            {
                theta = trial;
                p = tp;
                dual = td;
                break;
            }
            t = t / T::lit(2.0);
        }
    }

    let mut full = vec![T::zero(); c.m];
    for (&j, &v) in support.iter().zip(&p) {
        full[j] = v;
    }
    let residual = c.residual(&full);
    Ok(MaxEntSolution {
        p: ProbVector::from_solver(full),
        boundary: s < c.m,
        iterations,
        residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterSolution<T> {
    pub p: ProbVector<T>,
    pub radius: T,
    /// Largest distance between two vertices of `F(y)`.
    pub diameter: T,
    pub vertices: Vec<Vec<T>>,
}

/// Euclidean Chebyshev center of `F(y)`: the center of the smallest ball
/// enclosing its vertices. Requires `m <= 12`.
pub fn chebyshev_center<T: Real>(c: &MomentConstraints<T>) -> Result<CenterSolution<T>> {
    let vertices = c.vertices(None)?;
    if vertices.is_empty() {
        return Err(Error::numeric(
            "vertex enumeration found no vertex of a feasible set",
        ));
    }
    let ball = min_enclosing_ball(&vertices);
    Ok(CenterSolution {
        p: ProbVector::from_solver(ball.center),
        radius: ball.radius,
        diameter: diameter(&vertices),
        vertices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxSolution<T> {
    pub p: ProbVector<T>,
    /// Optimal `max_i p_i`, to within the bisection tolerance.
    pub max_coordinate: T,
}

/// Tolerance of the bisection on the uniform-norm bound.
pub const MINMAX_TOLERANCE: f64 = 1e-9;

/// A point of `F(y)` with the smallest largest coordinate.
///
/// Bisects on the bound `u`, testing `F(y) ∩ {p_i <= u}` for feasibility with
/// the simplex method. The minimizer need not be unique; the returned point is
/// the mean of the vertices of the optimal face, which makes the result
/// symmetric under relabeling of the categories. Requires `m <= 12`.
pub fn min_uniform_norm<T: Real>(c: &MomentConstraints<T>) -> Result<MinMaxSolution<T>> {
    c.check_enumerable()?;
    let m = c.m;
    let r = c.system.rows;
    // [A 0; I I] (p, s) = (b, u)
    let mut sys = Dense::zeros(r + m, 2 * m);
    for i in 0..r {
        for j in 0..m {
            sys.set(i, j, c.system.get(i, j));
        }
    }
    for j in 0..m {
        sys.set(r + j, j, T::one());
        sys.set(r + j, m + j, T::one());
    }
    let lp_tol = T::tol(1e-11);
    let feasible = |u: T| -> Result<Option<Vec<T>>> {
        let mut rhs = c.rhs.clone();
        rhs.extend(std::iter::repeat_n(u, m));
        Ok(
            match minimize(&vec![T::zero(); 2 * m], &sys, &rhs, lp_tol)? {
                LpOutcome::Optimal { x, .. } => Some(x[..m].to_vec()),
                _ => None,
            },
        )
    };

    let mut lo = T::one() / T::lit(m as f64);
    let mut hi = T::one();
    let mut witness =
        feasible(hi)?.ok_or_else(|| Error::numeric("feasible instance failed the LP check"))?;
    if let Some(x) = feasible(lo)? {
        hi = lo;
        witness = x;
    } else {
        let tol = T::tol(MINMAX_TOLERANCE);
        while hi - lo > tol {
            let mid = (lo + hi) / T::lit(2.0);
            match feasible(mid)? {
                Some(x) => {
                    hi = mid;
                    witness = x;
                }
                None => lo = mid,
            }
        }
    }

    let face = c.vertices(Some(hi))?;
    let p = if face.is_empty() {
        witness
    } else {
        let n = T::lit(face.len() as f64);
        (0..m)
            .map(|j| face.iter().map(|v| v[j]).sum::<T>() / n)
            .collect()
    };
    let max_coordinate = p.iter().copied().fold(T::zero(), T::max);
    Ok(MinMaxSolution {
        p: ProbVector::from_solver(p),
        max_coordinate,
    })
}
