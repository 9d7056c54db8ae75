//! Natural cubic interpolating splines and penalized smoothing splines.
//!
//! The smoothing spline minimizes
//!
//! ```text
//! ψ_y(f) = ∫ f''(t)² dt + (λ / n) Σ_{i=0}^{n} (y_i - f(t_i))²
//! ```
//!
//! over knots `t_0 < … < t_n`. Note the convention: `λ` weights the *data*
//! term, so a larger `λ` trusts the data more and `λ → ∞` recovers the
//! interpolating spline. This is the reciprocal of the usual statistics
//! smoothing parameter.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{solve_banded_spd, solve_tridiagonal};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Zero second derivative at both ends.
    Natural,
}

/// Piecewise cubic on `[t_0, t_n]`; segment `i` is
/// `a + b·u + c·u² + d·u³` with `u = x - t_i`. Outside the knot hull the
/// spline continues linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubicSpline<T> {
    knots: Vec<T>,
    coefficients: Vec<[T; 4]>,
    boundary: Boundary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lambda: Option<T>,
}

fn check_knots<T: Real>(knots: &[T]) -> Result<()> {
    if knots.len() < 2 {
        return Err(Error::usage(format!(
            "spline needs at least 2 knots, got {}",
            knots.len()
        )));
    }
    if knots.iter().any(|t| !t.is_finite()) {
        return Err(Error::usage("knots must be finite"));
    }
    if let Some(i) = knots.windows(2).position(|w| !(w[0] < w[1])) {
        return Err(Error::usage(format!(
            "knots must be strictly increasing (t[{i}] >= t[{}])",
            i + 1
        )));
    }
    Ok(())
}

impl<T: Real> CubicSpline<T> {
    /// Builds a spline from raw segment coefficients.
    pub fn from_coefficients(knots: Vec<T>, coefficients: Vec<[T; 4]>) -> Result<Self> {
        check_knots(&knots)?;
        if coefficients.len() + 1 != knots.len() {
            return Err(Error::usage("need one coefficient block per interval"));
        }
        Ok(Self {
            knots,
            coefficients,
            boundary: Boundary::Natural,
            lambda: None,
        })
    }

    /// Spline with knot values `g` and knot second derivatives `m`.
    fn from_values_and_moments(knots: Vec<T>, g: &[T], m: &[T]) -> Self {
        let six = T::lit(6.0);
        let coefficients = (0..knots.len() - 1)
            .map(|i| {
                let h = knots[i + 1] - knots[i];
                let b = (g[i + 1] - g[i]) / h - h * (T::lit(2.0) * m[i] + m[i + 1]) / six;
                [g[i], b, m[i] / T::lit(2.0), (m[i + 1] - m[i]) / (six * h)]
            })
            .collect();
        Self {
            knots,
            coefficients,
            boundary: Boundary::Natural,
            lambda: None,
        }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn coefficients(&self) -> &[[T; 4]] {
        &self.coefficients
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Smoothing parameter, for splines produced by [`smoothing_spline`].
    pub fn lambda(&self) -> Option<T> {
        self.lambda
    }

    fn segment(&self, x: T) -> usize {
        let last = self.coefficients.len() - 1;
        self.knots
            .partition_point(|&t| t <= x)
            .saturating_sub(1)
            .min(last)
    }

    fn end_state(&self, left: bool) -> (T, T, T) {
        if left {
            let [a, b, ..] = self.coefficients[0];
            (self.knots[0], a, b)
        } else {
            let i = self.coefficients.len() - 1;
            let h = self.knots[i + 1] - self.knots[i];
            let [a, b, c, d] = self.coefficients[i];
            let v = a + h * (b + h * (c + h * d));
            let s = b + h * (T::lit(2.0) * c + T::lit(3.0) * h * d);
            (self.knots[i + 1], v, s)
        }
    }

    pub fn eval(&self, x: T) -> T {
        let n = self.knots.len();
        if x < self.knots[0] || x > self.knots[n - 1] {
            let (t, v, s) = self.end_state(x < self.knots[0]);
            return v + s * (x - t);
        }
        let i = self.segment(x);
        let u = x - self.knots[i];
        let [a, b, c, d] = self.coefficients[i];
        a + u * (b + u * (c + u * d))
    }

    pub fn derivative(&self, x: T) -> T {
        let n = self.knots.len();
        if x < self.knots[0] || x > self.knots[n - 1] {
            return self.end_state(x < self.knots[0]).2;
        }
        let i = self.segment(x);
        let u = x - self.knots[i];
        let [_, b, c, d] = self.coefficients[i];
        b + u * (T::lit(2.0) * c + T::lit(3.0) * u * d)
    }

    pub fn second_derivative(&self, x: T) -> T {
        let n = self.knots.len();
        if x < self.knots[0] || x > self.knots[n - 1] {
            return T::zero();
        }
        let i = self.segment(x);
        let u = x - self.knots[i];
        let [_, _, c, d] = self.coefficients[i];
        T::lit(2.0) * c + T::lit(6.0) * u * d
    }

    /// `(t, s(t))` on `points` equally spaced samples of the knot hull.
    pub fn grid(&self, points: usize) -> Vec<(T, T)> {
        let lo = self.knots[0];
        let hi = self.knots[self.knots.len() - 1];
        let last = T::lit(points.max(2) as f64 - 1.0);
        (0..points.max(2))
            .map(|i| {
                let t = lo + (hi - lo) * T::lit(i as f64) / last;
                (t, self.eval(t))
            })
            .collect()
    }
}

/// `∫ s''(t)² dt` over the knot hull; `s''` is linear per segment so each
/// piece integrates in closed form.
pub fn bending_energy<T: Real>(s: &CubicSpline<T>) -> T {
    s.coefficients
        .iter()
        .zip(s.knots.windows(2))
        .map(|(&[_, _, c, d], w)| {
            let h = w[1] - w[0];
            let m0 = T::lit(2.0) * c;
            let m1 = m0 + T::lit(6.0) * d * h;
            h * (m0 * m0 + m0 * m1 + m1 * m1) / T::lit(3.0)
        })
        .sum()
}

/// Banded pieces of the interpolation system `Qᵀ g = R γ` relating knot
/// values `g` to interior second derivatives `γ`.
struct SplineSystem<T> {
    h: Vec<T>,
}

impl<T: Real> SplineSystem<T> {
    fn new(knots: &[T]) -> Self {
        Self {
            h: knots.windows(2).map(|w| w[1] - w[0]).collect(),
        }
    }

    fn interior(&self) -> usize {
        self.h.len() - 1
    }

    /// Non-zero entries of column `j` of `Q`: rows `j, j+1, j+2`.
    fn q_col(&self, j: usize) -> [T; 3] {
        let (a, b) = (T::one() / self.h[j], T::one() / self.h[j + 1]);
        [a, -a - b, b]
    }

    fn qt_mul(&self, y: &[T]) -> Vec<T> {
        (0..self.interior())
            .map(|j| {
                let q = self.q_col(j);
                q[0] * y[j] + q[1] * y[j + 1] + q[2] * y[j + 2]
            })
            .collect()
    }

    fn q_mul(&self, gamma: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.h.len() + 1];
        for (j, &gj) in gamma.iter().enumerate() {
            let q = self.q_col(j);
            for r in 0..3 {
                out[j + r] = out[j + r] + q[r] * gj;
            }
        }
        out
    }

    /// Bands of `R + α QᵀQ`.
    fn bands(&self, alpha: T) -> Vec<Vec<T>> {
        let m = self.interior();
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        let mut b0 = vec![T::zero(); m];
        let mut b1 = vec![T::zero(); m];
        let mut b2 = vec![T::zero(); m];
        for j in 0..m {
            let qj = self.q_col(j);
            b0[j] = (self.h[j] + self.h[j + 1]) / three
                + alpha * (qj[0] * qj[0] + qj[1] * qj[1] + qj[2] * qj[2]);
            if j + 1 < m {
                let qk = self.q_col(j + 1);
                b1[j] = self.h[j + 1] / six + alpha * (qj[1] * qk[0] + qj[2] * qk[1]);
            }
            if j + 2 < m {
                let qk = self.q_col(j + 2);
                b2[j] = alpha * qj[2] * qk[0];
            }
        }
        vec![b0, b1, b2]
    }
}

/// The natural cubic spline through `(knots[i], y[i])`: the `C²` interpolant
/// of least bending energy.
pub fn natural_cubic_spline<T: Real>(knots: &[T], y: &[T]) -> Result<CubicSpline<T>> {
    check_knots(knots)?;
    if y.len() != knots.len() {
        return Err(Error::usage(format!(
            "{} knots but {} values",
            knots.len(),
            y.len()
        )));
    }
    let sys = SplineSystem::new(knots);
    let m = sys.interior();
    let mut moments = vec![T::zero(); knots.len()];
    if m > 0 {
        let [b0, b1, _] = <[Vec<T>; 3]>::try_from(sys.bands(T::zero())).expect("three bands");
        let sup = &b1[..m - 1];
        let gamma = solve_tridiagonal(sup, &b0, sup, &sys.qt_mul(y))
            .ok_or_else(|| Error::numeric("singular spline system"))?;
        moments[1..=m].copy_from_slice(&gamma);
    }
    Ok(CubicSpline::from_values_and_moments(
        knots.to_vec(),
        y,
        &moments,
    ))
}

/// Data and smoothing weight for [`smoothing_spline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingProblem<T> {
    knots: Vec<T>,
    y: Vec<T>,
    lambda: T,
}

impl<T: Real> SmoothingProblem<T> {
    pub fn new(knots: Vec<T>, y: Vec<T>, lambda: T) -> Result<Self> {
        check_knots(&knots)?;
        if y.len() != knots.len() {
            return Err(Error::usage(format!(
                "{} knots but {} values",
                knots.len(),
                y.len()
            )));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::usage(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self { knots, y, lambda })
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// The divisor `n` of the data term: the number of intervals.
    fn n(&self) -> T {
        T::lit((self.knots.len() - 1) as f64)
    }

    /// `Σ (y_i - f(t_i))²` for any evaluable `f`.
    pub fn residual_sum(&self, f: impl Fn(T) -> T) -> T {
        self.knots
            .iter()
            .zip(&self.y)
            .map(|(&t, &y)| (y - f(t)) * (y - f(t)))
            .sum()
    }

    /// `ψ_y(s)` for a spline with the same knot hull.
    pub fn objective(&self, s: &CubicSpline<T>) -> T {
        bending_energy(s) + self.lambda / self.n() * self.residual_sum(|t| s.eval(t))
    }
}

/// Minimizer of the penalized functional, solved with the pentadiagonal
/// system `(R + α QᵀQ) γ = Qᵀ y`, `g = y - α Q γ`, where `α = n / λ`.
pub fn smoothing_spline<T: Real>(p: &SmoothingProblem<T>) -> Result<CubicSpline<T>> {
    let sys = SplineSystem::new(&p.knots);
    let m = sys.interior();
    let mut moments = vec![T::zero(); p.knots.len()];
    let mut g = p.y.clone();
    if m > 0 {
        let alpha = p.n() / p.lambda;
        let gamma = solve_banded_spd(&sys.bands(alpha), &sys.qt_mul(&p.y))
            .ok_or_else(|| Error::numeric("smoothing system is not positive definite"))?;
        for (gi, qg) in g.iter_mut().zip(sys.q_mul(&gamma)) {
            *gi = *gi - alpha * qg;
        }
        moments[1..=m].copy_from_slice(&gamma);
    }
    let mut s = CubicSpline::from_values_and_moments(p.knots.clone(), &g, &moments);
    s.lambda = Some(p.lambda);
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvScore<T> {
    pub lambda: T,
    pub score: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation<T> {
    pub lambda: T,
    pub scores: Vec<CvScore<T>>,
}

/// Relative slack within which two cross-validation scores count as tied.
pub const CV_TIE_TOLERANCE: f64 = 1e-9;

/// Leave-one-out grid search: for each candidate `λ`, refits without point
/// `i` and scores `Σ_i (y_i - s^{(-i)}(t_i))²`. Ties go to the larger `λ`.
pub fn cross_validate_lambda<T: Real>(
    knots: &[T],
    y: &[T],
    grid: &[T],
) -> Result<CrossValidation<T>> {
    if grid.is_empty() {
        return Err(Error::usage("empty lambda grid"));
    }
    if knots.len() < 4 {
        return Err(Error::usage("cross validation needs at least 4 points"));
    }
    // validates knots, lengths and every lambda up front
    for &l in grid {
        SmoothingProblem::new(knots.to_vec(), y.to_vec(), l)?;
    }
    let scores = grid
        .par_iter()
        .map(|&lambda| -> Result<CvScore<T>> {
            let mut score = T::zero();
            for i in 0..knots.len() {
                let kt: Vec<T> = knots
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &t)| t)
                    .collect();
                let yt: Vec<T> = y
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &v)| v)
                    .collect();
                let s = smoothing_spline(&SmoothingProblem::new(kt, yt, lambda)?)?;
                let r = y[i] - s.eval(knots[i]);
                score = score + r * r;
            }
            Ok(CvScore { lambda, score })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scores.iter().map(|s| s.score).fold(T::infinity(), T::min);
    let slack = best.abs() * T::lit(CV_TIE_TOLERANCE);
    let lambda = scores
        .iter()
        .filter(|s| s.score <= best + slack)
        .map(|s| s.lambda)
        .fold(T::neg_infinity(), T::max);
    Ok(CrossValidation { lambda, scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_points_give_a_line() {
        let s = natural_cubic_spline(&[0.0_f64, 1.0], &[0.0, 1.0]).unwrap();
        assert!((s.eval(0.3) - 0.3).abs() < 1e-15);
        assert_eq!(bending_energy(&s), 0.0);
    }

    #[test]
    fn collinear_data() {
        let s = natural_cubic_spline(&[0.0_f64, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        for x in [0.0, 0.4, 1.5, 2.0] {
            assert!((s.eval(x) - (2.0 * x + 1.0)).abs() < 1e-14);
        }
        assert!(bending_energy(&s).abs() < 1e-24);
    }

    #[test]
    fn knot_errors() {
        assert!(natural_cubic_spline(&[0.0], &[1.0]).is_err());
        assert!(natural_cubic_spline(&[0.0_f64, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(natural_cubic_spline(&[0.0_f64, 2.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(natural_cubic_spline(&[0.0_f64, 1.0], &[1.0]).is_err());
        assert!(SmoothingProblem::new(vec![0.0, 1.0], vec![0.0, 1.0], 0.0).is_err());
        assert!(SmoothingProblem::new(vec![0.0, 1.0], vec![0.0, 1.0], -1.0).is_err());
    }

    #[test]
    fn natural_boundary_and_continuity() {
        let t = [0.0_f64, 0.3, 0.5, 1.1, 1.4, 2.0];
        let y = [1.0, -1.0, 0.5, 2.0, 0.0, 1.0];
        let s = natural_cubic_spline(&t, &y).unwrap();
        assert!(s.second_derivative(0.0).abs() < 1e-9);
        assert!(s.second_derivative(2.0).abs() < 1e-9);
        for (i, w) in s.coefficients().windows(2).enumerate() {
            let h = t[i + 1] - t[i];
            let [a, b, c, d] = w[0];
            let left = [
                a + h * (b + h * (c + h * d)),
                b + h * (2.0 * c + 3.0 * h * d),
                2.0 * c + 6.0 * h * d,
            ];
            let right = [w[1][0], w[1][1], 2.0 * w[1][2]];
            for k in 0..3 {
                assert!(
                    (left[k] - right[k]).abs() < 1e-9,
                    "knot {} order {k}",
                    i + 1
                );
            }
        }
    }

    #[test]
    fn synthetic_energy() {
        // s''(t) = t on [0, 1]
        let s =
            CubicSpline::from_coefficients(vec![0.0_f64, 1.0], vec![[0.0, 0.0, 0.0, 1.0 / 6.0]])
                .unwrap();
        assert!((bending_energy(&s) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn linear_extrapolation() {
        let s = natural_cubic_spline(&[0.0_f64, 1.0, 2.0, 3.0], &[0.0, 1.0, 0.0, 1.0]).unwrap();
        let slope = s.derivative(3.0);
        assert!((s.eval(4.0) - (s.eval(3.0) + slope)).abs() < 1e-12);
        assert_eq!(s.second_derivative(-1.0), 0.0);
    }

    #[test]
    fn symmetric_smoothing() {
        for lambda in [1e-3, 0.5, 10.0, 1e6] {
            let p = SmoothingProblem::new(vec![-1.0_f64, 0.0, 1.0], vec![1.0, 0.0, 1.0], lambda)
                .unwrap();
            let s = smoothing_spline(&p).unwrap();
            for x in [0.1, 0.37, 0.9, 1.0] {
                assert!((s.eval(x) - s.eval(-x)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_candidate_grid() {
        let t = [0.0_f64, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0, 1.0, 0.5, 0.2, 1.0];
        assert_eq!(cross_validate_lambda(&t, &y, &[1.0]).unwrap().lambda, 1.0);
        assert!(cross_validate_lambda(&t, &y, &[]).is_err());
        assert!(cross_validate_lambda(&t[..3], &y[..3], &[1.0]).is_err());
    }

    #[test]
    fn json_record() {
        let s = smoothing_spline(
            &SmoothingProblem::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0], 2.0).unwrap(),
        )
        .unwrap();
        let json = serde_json::to_value(&s).unwrap();
        assert_eq!(json["boundary"], "natural");
        assert_eq!(json["lambda"], 2.0);
        assert_eq!(json["coefficients"].as_array().unwrap().len(), 2);
        let back: CubicSpline<f64> = serde_json::from_value(json).unwrap();
        assert_eq!(back, s);
    }
}
