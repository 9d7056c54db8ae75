//! Finite-dimensional linear recovery: `S f` from `y ≈ N f` for `f ∈ ℝ^d`
//! with `‖f‖_F = √(fᵀ W f) <= r` and `‖N f - y‖₂ <= δ`.
//!
//! Internally everything runs in whitened coordinates `g = Lᵀ f` where
//! `W = L Lᵀ`, so the a-priori set is a Euclidean ball. With the SVD
//! `Ñ = N L^{-T} = U Σ V_kᵀ`, a point is written `g = V_k c + P z` where `P`
//! spans the kernel of `Ñ`; the data constraint then only involves `c`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{diameter, min_enclosing_ball};
use crate::model::{seeded_rng, SeededRng};
use crate::quadrature::fmt17;

/// Random directions used to estimate the geometry of noisy feasible sets.
pub const SUPPORT_DIRECTIONS: usize = 64;

/// Relative slack when testing `‖f‖_F <= r`.
const BALL_SLACK: f64 = 1e-12;

/// Row-major JSON form of a [`LinearProblem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRecord {
    pub s: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub r: f64,
    #[serde(default)]
    pub delta: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProblem {
    s: DMatrix<f64>,
    n: DMatrix<f64>,
    w: DMatrix<f64>,
    r: f64,
    delta: f64,
    white: Whitened,
}

/// Whitened operators and the SVD of `Ñ`.
#[derive(Debug, Clone)]
struct Whitened {
    /// `L^{-T}`: maps `g` back to `f`.
    lt: DMatrix<f64>,
    /// `S L^{-T}`.
    st: DMatrix<f64>,
    u: DMatrix<f64>,
    sing: Vec<f64>,
    vk: DMatrix<f64>,
    kernel: DMatrix<f64>,
}

fn matrix(name: &str, rows: &[Vec<f64>], cols: usize) -> Result<DMatrix<f64>> {
    if let Some(i) = rows.iter().position(|r| r.len() != cols) {
        return Err(Error::usage(format!(
            "{name}: row {i} has {} entries, expected {cols}",
            rows[i].len()
        )));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::usage(format!("{name}: entries must be finite")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Extends the orthonormal columns of `basis` to an orthonormal basis of
/// `ℝ^d` and returns only the new columns.
fn orthogonal_complement(basis: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = (0..basis.ncols())
        .map(|j| basis.column(j).into_owned())
        .collect();
    let have = cols.len();
    for e in 0..d {
        if cols.len() == d {
            break;
        }
        let mut v = DVector::from_fn(d, |i, _| if i == e { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            cols.push(v / nv);
        }
    }
    DMatrix::from_fn(d, d - have, |i, j| cols[have + j][i])
}

impl LinearProblem {
    pub fn new(
        s: DMatrix<f64>,
        n: DMatrix<f64>,
        w: DMatrix<f64>,
        r: f64,
        delta: f64,
    ) -> Result<Self> {
        let d = w.nrows();
        if d == 0 || w.ncols() != d {
            return Err(Error::usage("weight matrix must be square and nonempty"));
        }
        if s.ncols() != d || n.ncols() != d {
            return Err(Error::usage(format!(
                "solution and information maps need {d} columns"
            )));
        }
        if s.nrows() == 0 {
            return Err(Error::usage("solution map needs at least one row"));
        }
        if n.nrows() > d {
            return Err(Error::usage(format!(
                "{} functionals exceed the dimension {d}",
                n.nrows()
            )));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::usage(format!("radius r must be positive, got {r}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::usage(format!(
                "noise level must be nonnegative, got {delta}"
            )));
        }
        let scale = w.amax().max(f64::MIN_POSITIVE);
        if (&w - w.transpose()).amax() > 1e-12 * scale {
            return Err(Error::usage("weight matrix is not symmetric"));
        }
        let chol = w
            .clone()
            .cholesky()
            .ok_or_else(|| Error::usage("weight matrix is not positive definite"))?;
        let l_inv = chol
            .l()
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or_else(|| Error::numeric("singular Cholesky factor"))?;
        let lt = l_inv.transpose();
        let st = &s * &lt;
        let nt = &n * &lt;
        let k = n.nrows();
        let (u, sing, vk) = if k == 0 {
            (DMatrix::zeros(0, 0), Vec::new(), DMatrix::zeros(d, 0))
        } else {
            let svd = nt.svd(true, true);
            let sing: Vec<f64> = svd.singular_values.iter().copied().collect();
            let top = sing.iter().copied().fold(0.0, f64::max);
            if sing.iter().any(|&v| !(v > 1e-10 * top)) {
                return Err(Error::usage(
                    "information functionals are linearly dependent",
                ));
            }
            (
                svd.u.expect("u requested"),
                sing,
                svd.v_t.expect("v requested").transpose(),
            )
        };
        let kernel = orthogonal_complement(&vk, d);
        let white = Whitened {
            lt,
            st,
            u,
            sing,
            vk,
            kernel,
        };
        Ok(Self {
            s,
            n,
            w,
            r,
            delta,
            white,
        })
    }

    pub fn from_record(rec: &LinearRecord) -> Result<Self> {
        let d = rec.w.len();
        let s = matrix("s", &rec.s, d)?;
        let n = matrix("n", &rec.n, d)?;
        let w = matrix("w", &rec.w, d)?;
        Self::new(s, n, w, rec.r, rec.delta)
    }

    pub fn to_record(&self) -> LinearRecord {
        LinearRecord {
            s: to_rows(&self.s),
            n: to_rows(&self.n),
            w: to_rows(&self.w),
            r: self.r,
            delta: self.delta,
        }
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Number of functionals `k`.
    pub fn info_len(&self) -> usize {
        self.n.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn solution_map(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn information_map(&self) -> &DMatrix<f64> {
        &self.n
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// The same problem with a different ball radius and noise level.
    pub fn with_body(&self, r: f64, delta: f64) -> Result<Self> {
        Self::new(self.s.clone(), self.n.clone(), self.w.clone(), r, delta)
    }

    /// The problem restricted to the first `count` functionals.
    pub fn nested(&self, count: usize) -> Result<Self> {
        if count > self.info_len() {
            return Err(Error::usage(format!(
                "only {} functionals available",
                self.info_len()
            )));
        }
        Self::new(
            self.s.clone(),
            self.n.rows(0, count).into_owned(),
            self.w.clone(),
            self.r,
            self.delta,
        )
    }

    pub fn f_norm(&self, f: &[f64]) -> f64 {
        let f = DVector::from_column_slice(f);
        f.dot(&(&self.w * &f)).max(0.0).sqrt()
    }

    pub fn apply_s(&self, f: &[f64]) -> Vec<f64> {
        (&self.s * DVector::from_column_slice(f))
            .iter()
            .copied()
            .collect()
    }

    pub fn apply_n(&self, f: &[f64]) -> Vec<f64> {
        (&self.n * DVector::from_column_slice(f))
            .iter()
            .copied()
            .collect()
    }

    fn check_data(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.info_len() {
            return Err(Error::usage(format!(
                "expected {} data values, got {}",
                self.info_len(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::usage("data must be finite"));
        }
        let yt = self.white.u.transpose() * DVector::from_column_slice(y);
        Ok(yt.iter().copied().collect())
    }

    fn g_from(&self, c: &[f64], z: &[f64]) -> DVector<f64> {
        &self.white.vk * DVector::from_column_slice(c)
            + &self.white.kernel * DVector::from_column_slice(z)
    }

    fn output_of(&self, c: &[f64], z: &[f64]) -> Vec<f64> {
        (&self.white.st * self.g_from(c, z))
            .iter()
            .copied()
            .collect()
    }

    fn preimage_of(&self, c: &[f64], z: &[f64]) -> Vec<f64> {
        (&self.white.lt * self.g_from(c, z))
            .iter()
            .copied()
            .collect()
    }

    fn kernel_dim(&self) -> usize {
        self.white.kernel.ncols()
    }

    /// Smallest `c` with `‖Σ c - ỹ‖ <= delta`.
    fn min_norm_slab(&self, yt: &[f64], delta: f64) -> Vec<f64> {
        let s = &self.white.sing;
        if delta == 0.0 {
            return yt.iter().zip(s).map(|(y, s)| y / s).collect();
        }
        if norm(yt) <= delta {
            return vec![0.0; yt.len()];
        }
        let residual = |mu: f64| {
            yt.iter()
                .zip(s)
                .map(|(y, s)| (y / (1.0 + mu * s * s)).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let mut hi = 1.0;
        while residual(hi) > delta && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..400 {
            let mid = if lo > 0.0 { (lo * hi).sqrt() } else { hi * 0.5 };
            if residual(mid) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
            if lo > 0.0 && hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        yt.iter()
            .zip(s)
            .map(|(y, s)| hi * s * y / (1.0 + hi * s * s))
            .collect()
    }

    /// Maximizer of `⟨a_c, c⟩ + ⟨a_z, z⟩` over the noisy feasible set,
    /// from the two-multiplier Lagrangian dual.
    fn support(&self, yt: &[f64], ac: &[f64], az: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (r, delta) = (self.r, self.delta);
        let s = &self.white.sing;
        if norm(ac) == 0.0 && norm(az) == 0.0 {
            return (self.min_norm_slab(yt, delta), vec![0.0; az.len()]);
        }
        let point = |alpha: f64, beta: f64| -> Vec<f64> {
            (0..s.len())
                .map(|i| {
                    (ac[i] + 2.0 * beta * s[i] * yt[i]) / (2.0 * alpha + 2.0 * beta * s[i] * s[i])
                })
                .collect()
        };
        let slab = |c: &[f64]| {
            (0..s.len())
                .map(|i| (s[i] * c[i] - yt[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let c_for = |alpha: f64| -> Vec<f64> {
            let c0 = point(alpha, 0.0);
            if slab(&c0) <= delta {
                return c0;
            }
            let mut hi = 1.0;
            while slab(&point(alpha, hi)) > delta && hi < 1e300 {
                hi *= 2.0;
            }
            let mut lo = 0.0;
            for _ in 0..400 {
                let mid = if lo > 0.0 { (lo * hi).sqrt() } else { hi * 0.5 };
                if slab(&point(alpha, mid)) > delta {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if lo > 0.0 && hi / lo - 1.0 < 1e-14 {
                    break;
                }
            }
            point(alpha, hi)
        };
        let size = |alpha: f64| {
            let c = c_for(alpha);
            let z: Vec<f64> = az.iter().map(|a| a / (2.0 * alpha)).collect();
            (norm(&c).hypot(norm(&z)), c, z)
        };
        let mut hi = 1.0;
        while size(hi).0 > r && hi < 1e300 {
            hi *= 2.0;
        }
        let mut lo = hi;
        while size(lo).0 <= r && lo > 1e-300 {
            lo *= 0.5;
        }
        for _ in 0..400 {
            let mid = (lo * hi).sqrt();
            if size(mid).0 > r {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-14 {
                break;
            }
        }
        let (_, c, z) = size(hi);
        (c, z)
    }

    /// Whitened data coordinates and the minimal-norm feasible point,
    /// or the infeasibility certificate.
    fn feasible_start(&self, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let yt = self.check_data(y)?;
        let c = self.min_norm_slab(&yt, self.delta);
        let nc = norm(&c);
        if nc > self.r * (1.0 + BALL_SLACK) {
            return Err(Error::Infeasible {
                what: "no element of the a-priori ball matches the data".into(),
                residual: nc - self.r,
            });
        }
        Ok((yt, c))
    }
}

fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSetGeometry {
    /// Chebyshev center of `S(F_y)`.
    pub center: Vec<f64>,
    /// An element of `F_y` mapped onto the center, when known.
    pub center_preimage: Option<Vec<f64>>,
    pub radius: f64,
    pub diameter: f64,
    /// Exact for `δ = 0`; otherwise estimated from support points.
    pub exact: bool,
}

/// Chebyshev center, radius and diameter of `S(F_y)`.
///
/// For exact data `F_y` is `g0 + P z`, `‖z‖ <= ρ = √(r² - ‖g0‖²)`, so `S(F_y)` is
/// an ellipsoid centered at `S f0` with radius `ρ σ_max(S̃ P)`. For noisy data
/// the support points of `S(F_y)` in 64 seeded random directions are computed
/// exactly and their smallest enclosing ball is reported.
pub fn feasible_geometry(p: &LinearProblem, y: &[f64]) -> Result<FeasibleSetGeometry> {
    let (yt, c) = p.feasible_start(y)?;
    if p.delta == 0.0 {
        let rho = (p.r * p.r - norm(&c).powi(2)).max(0.0).sqrt();
        let radius = rho * sigma_max(&(&p.white.st * &p.white.kernel));
        let z = vec![0.0; p.kernel_dim()];
        return Ok(FeasibleSetGeometry {
            center: p.output_of(&c, &z),
            center_preimage: Some(p.preimage_of(&c, &z)),
            radius,
            diameter: 2.0 * radius,
            exact: true,
        });
    }
    let points = support_cloud(p, &yt, SUPPORT_DIRECTIONS, 0);
    let ball = min_enclosing_ball(&points);
    Ok(FeasibleSetGeometry {
        center: ball.center,
        center_preimage: None,
        radius: ball.radius,
        diameter: diameter(&points),
        exact: false,
    })
}

fn unit_direction(rng: &mut SeededRng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Support points `S̃ g` of `S(F_y)` maximizing `⟨v, ·⟩` for random unit `v`.
fn support_cloud(p: &LinearProblem, yt: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let v = unit_direction(&mut rng, p.output_dim());
            let (c, z) = support_along(p, yt, &v);
            p.output_of(&c, &z)
        })
        .collect()
}

fn support_along(p: &LinearProblem, yt: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = p.white.st.transpose() * DVector::from_column_slice(v);
    let ac: Vec<f64> = (p.white.vk.transpose() * &a).iter().copied().collect();
    let az: Vec<f64> = (p.white.kernel.transpose() * &a).iter().copied().collect();
    p.support(yt, &ac, &az)
}

/// The center of `S(F_y)`.
pub fn central_algorithm(p: &LinearProblem, y: &[f64]) -> Result<Vec<f64>> {
    Ok(feasible_geometry(p, y)?.center)
}

/// `S(f_y)` for the element `f_y ∈ F_y` of smallest `‖·‖_F`.
pub fn interpolatory_algorithm(p: &LinearProblem, y: &[f64]) -> Result<Vec<f64>> {
    let (_, c) = p.feasible_start(y)?;
    Ok(p.output_of(&c, &vec![0.0; p.kernel_dim()]))
}

/// `S(f_y)` for a caller-chosen `f_y`, which must lie in `F_y`.
pub fn interpolatory_algorithm_with(p: &LinearProblem, y: &[f64], f_y: &[f64]) -> Result<Vec<f64>> {
    p.check_data(y)?;
    if f_y.len() != p.dim() {
        return Err(Error::usage(format!(
            "f_y has {} entries, expected {}",
            f_y.len(),
            p.dim()
        )));
    }
    let fnorm = p.f_norm(f_y);
    let misfit = norm(
        &p.apply_n(f_y)
            .iter()
            .zip(y)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    );
    let scale = 1.0 + norm(y);
    if fnorm > p.r * (1.0 + 1e-9) || misfit > p.delta + 1e-9 * scale {
        return Err(Error::usage(format!(
            "f_y is not in F_y (‖f‖_F = {fnorm:e}, misfit {misfit:e})"
        )));
    }
    Ok(p.apply_s(f_y))
}

/// `argmin ‖f‖_F` subject to `N f = y`, from the normal equations
/// `f = W⁻¹Nᵀ (N W⁻¹ Nᵀ)⁻¹ y`.
pub fn minimal_norm_interpolant(p: &LinearProblem, y: &[f64]) -> Result<Vec<f64>> {
    p.check_data(y)?;
    if p.info_len() == 0 {
        return Ok(vec![0.0; p.dim()]);
    }
    let chol =
        p.w.clone()
            .cholesky()
            .ok_or_else(|| Error::numeric("weight matrix lost definiteness"))?;
    let x = chol.solve(&p.n.transpose());
    let gram = &p.n * &x;
    let a = gram
        .cholesky()
        .ok_or_else(|| Error::numeric("singular information Gram matrix"))?
        .solve(&DVector::from_column_slice(y));
    Ok((x * a).iter().copied().collect())
}

/// `S(argmin_f max(‖f‖_F, λ ‖N f - y‖₂))`; `λ = ∞` interpolates exactly.
///
/// For finite `λ` the level `t` is bisected: `{‖f‖_F <= t, ‖N f - y‖ <= t/λ}`
/// is nonempty iff the smallest element of the noise slab of width `t/λ` has
/// norm at most `t`.
pub fn optimization_algorithm(p: &LinearProblem, y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::usage(format!("λ must be positive, got {lambda}")));
    }
    if lambda == f64::INFINITY {
        return Ok(p.apply_s(&minimal_norm_interpolant(p, y)?));
    }
    let yt = p.check_data(y)?;
    let c0 = p.min_norm_slab(&yt, 0.0);
    let top = norm(&c0);
    let z = vec![0.0; p.kernel_dim()];
    if top == 0.0 {
        return Ok(p.output_of(&c0, &z));
    }
    let (mut lo, mut hi) = (0.0, top);
    while hi - lo > 1e-13 * top {
        let mid = 0.5 * (lo + hi);
        if norm(&p.min_norm_slab(&yt, mid / lambda)) <= mid {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(p.output_of(&p.min_norm_slab(&yt, hi / lambda), &z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub samples: usize,
    /// Ascent steps applied to the worst samples.
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            samples: 100_000,
            refine_steps: 50,
            seed: 0,
        }
    }
}

/// Number of worst samples refined by ascent.
const REFINED: usize = 8;

/// `sup_{f ∈ F_y} ‖S f - output‖` estimated from uniform samples of `F_y`
/// followed by ascent from the worst of them.
pub fn sampled_worst_case_error(
    p: &LinearProblem,
    y: &[f64],
    output: &[f64],
    opts: &Sampling,
) -> Result<f64> {
    if output.len() != p.output_dim() {
        return Err(Error::usage(format!(
            "output has {} entries, expected {}",
            output.len(),
            p.output_dim()
        )));
    }
    let (yt, c_min) = p.feasible_start(y)?;
    let mut rng = seeded_rng(opts.seed);
    let m = p.kernel_dim();
    let k = p.info_len();
    let err = |c: &[f64], z: &[f64]| {
        norm(
            &p.output_of(c, z)
                .iter()
                .zip(output)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        )
    };
    let ball_point = |rng: &mut SeededRng, dim: usize, radius: f64| -> Vec<f64> {
        if dim == 0 {
            return Vec::new();
        }
        let u: f64 = rng.random();
        let scale = radius * u.powf(1.0 / dim as f64);
        unit_direction(rng, dim)
            .into_iter()
            .map(|x| x * scale)
            .collect()
    };

    let mut pool: Vec<(f64, Vec<f64>, Vec<f64>)> =
        vec![(err(&c_min, &vec![0.0; m]), c_min.clone(), vec![0.0; m])];
    let exact = p.delta == 0.0;
    let rho = (p.r * p.r - norm(&c_min).powi(2)).max(0.0).sqrt();
    for _ in 0..opts.samples {
        let (c, z) = if exact {
            (c_min.clone(), ball_point(&mut rng, m, rho))
        } else {
            let z = ball_point(&mut rng, m, p.r);
            let u = ball_point(&mut rng, k, p.delta);
            let c: Vec<f64> = (0..k).map(|i| (u[i] + yt[i]) / p.white.sing[i]).collect();
            if norm(&c).hypot(norm(&z)) > p.r {
                continue;
            }
            (c, z)
        };
        let e = err(&c, &z);
        if pool.len() < REFINED || e > pool[pool.len() - 1].0 {
            pool.push((e, c, z));
            pool.sort_by(|a, b| b.0.total_cmp(&a.0));
            pool.truncate(REFINED);
        }
    }

    let st_kernel = &p.white.st * &p.white.kernel;
    let mut best = pool[0].0;
    for (e0, mut c, mut z) in pool {
        let mut e = e0;
        for _ in 0..opts.refine_steps {
            let diff: Vec<f64> = p
                .output_of(&c, &z)
                .iter()
                .zip(output)
                .map(|(a, b)| a - b)
                .collect();
            let dn = norm(&diff);
            if dn == 0.0 {
                break;
            }
            let v: Vec<f64> = diff.iter().map(|x| x / dn).collect();
            if exact {
                let grad = st_kernel.transpose() * DVector::from_column_slice(&v);
                let gn = grad.norm();
                if gn == 0.0 {
                    break;
                }
                z = grad.iter().map(|x| rho * x / gn).collect();
            } else {
                (c, z) = support_along(p, &yt, &v);
            }
            let next = err(&c, &z);
            if next <= e * (1.0 + 1e-15) {
                e = e.max(next);
                break;
            }
            e = next;
        }
        best = best.max(e);
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Nested information

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub n: usize,
    /// `‖S f - S f_n‖` for the minimal-norm interpolant `f_n` of `N_n f`.
    pub error: f64,
    /// `r(N_n)`: radius of `S` over the unit ball intersected with `ker N_n`.
    pub radius: f64,
    /// `2 ‖f‖_F r(N_n)`.
    pub bound: f64,
    /// `error / bound`, 0 when the bound vanishes.
    pub ratio: f64,
    /// `‖f - f_n‖_F`.
    pub w_distance: f64,
}

/// Errors of minimal-norm interpolation with the first `n` functionals, and
/// the bound `2 ‖f‖_F r(N_n)`, for each `n` in `ns`.
pub fn asymptotic_experiment(
    p: &LinearProblem,
    f: &[f64],
    ns: &[usize],
) -> Result<Vec<AsymptoticRow>> {
    if p.delta != 0.0 {
        return Err(Error::usage(
            "asymptotic experiment needs exact information",
        ));
    }
    if f.len() != p.dim() {
        return Err(Error::usage(format!(
            "f has {} entries, expected {}",
            f.len(),
            p.dim()
        )));
    }
    let sf = p.apply_s(f);
    let fnorm = p.f_norm(f);
    ns.iter()
        .map(|&n| {
            let q = p.nested(n)?;
            let yt = q.check_data(&q.apply_n(f))?;
            let c = q.min_norm_slab(&yt, 0.0);
            let z = vec![0.0; q.kernel_dim()];
            let fn_ = q.preimage_of(&c, &z);
            let out = q.output_of(&c, &z);
            let error = norm(&sf.iter().zip(&out).map(|(a, b)| a - b).collect::<Vec<_>>());
            let radius = sigma_max(&(&q.white.st * &q.white.kernel));
            let bound = 2.0 * fnorm * radius;
            let ratio = if bound > 0.0 { error / bound } else { 0.0 };
            let diff: Vec<f64> = f.iter().zip(&fn_).map(|(a, b)| a - b).collect();
            Ok(AsymptoticRow {
                n,
                error,
                radius,
                bound,
                ratio,
                w_distance: q.f_norm(&diff),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Instances and batch experiments

/// A problem, its data, and how it was generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearInstance {
    pub id: usize,
    pub seed: Option<u64>,
    pub problem: LinearRecord,
    pub y: Vec<f64>,
    /// The instance the data came from, when known.
    #[serde(default)]
    pub f: Option<Vec<f64>>,
}

impl LinearInstance {
    pub fn build(&self) -> Result<LinearProblem> {
        LinearProblem::from_record(&self.problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub max_dim: usize,
    pub r: f64,
    pub delta: f64,
    /// Square information (`k = d`) for nested experiments; otherwise
    /// `1 <= k < d`.
    pub full_information: bool,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            max_dim: 8,
            r: 1.0,
            delta: 0.0,
            full_information: false,
        }
    }
}

fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Seeded random instance. `S`, `N` have standard normal entries and
/// `W = AᵀA/d + I/2`. The data come from an `f` with `‖f‖_F = 0.6 r`, plus
/// noise of norm at most `δ/2`.
pub fn random_instance(id: usize, seed: u64, spec: &InstanceSpec) -> Result<LinearInstance> {
    if spec.max_dim < 2 {
        return Err(Error::usage("random instances need max_dim >= 2"));
    }
    let mut rng = seeded_rng(seed);
    let d = rng.random_range(2..=spec.max_dim);
    let k = if spec.full_information {
        d
    } else {
        rng.random_range(1..d)
    };
    let out = rng.random_range(1..=d);
    let s = gaussian_matrix(&mut rng, out, d);
    let n = gaussian_matrix(&mut rng, k, d);
    let a = gaussian_matrix(&mut rng, d, d);
    let mut w = a.transpose() * &a / d as f64 + DMatrix::identity(d, d) * 0.5;
    w = (&w + w.transpose()) * 0.5;
    let p = LinearProblem::new(s, n, w, spec.r, spec.delta)?;
    let dir = unit_direction(&mut rng, d);
    let scale = 0.6 * spec.r / p.f_norm(&dir);
    let f: Vec<f64> = dir.iter().map(|x| x * scale).collect();
    let mut y = p.apply_n(&f);
    if spec.delta > 0.0 {
        let u: f64 = rng.random();
        let e = unit_direction(&mut rng, k);
        let len = 0.5 * spec.delta * u.powf(1.0 / k as f64);
        for (yi, ei) in y.iter_mut().zip(e) {
            *yi += len * ei;
        }
    }
    Ok(LinearInstance {
        id,
        seed: Some(seed),
        problem: p.to_record(),
        y,
        f: Some(f),
    })
}

/// `S = I`, `W = diag(weights)`, `N` the coordinate functionals in order.
pub fn diagonal_problem(weights: &[f64]) -> Result<LinearProblem> {
    let d = weights.len();
    LinearProblem::new(
        DMatrix::identity(d, d),
        DMatrix::identity(d, d),
        DMatrix::from_diagonal(&DVector::from_column_slice(weights)),
        1.0,
        0.0,
    )
}

/// One line of an experiment report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub instance_id: usize,
    /// `n` or `λ` depending on the experiment.
    pub key: f64,
    pub error: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// CSV with columns `instance_id,<key>,error,bound,ratio`.
pub fn report_csv(key: &str, rows: &[ReportRow]) -> String {
    let mut out = format!("instance_id,{key},error,bound,ratio\n");
    for r in rows {
        let key = if r.key.fract() == 0.0 && r.key.abs() < 1e15 {
            format!("{}", r.key as i64)
        } else {
            fmt17(r.key)
        };
        out.push_str(&format!(
            "{},{key},{},{},{}\n",
            r.instance_id,
            fmt17(r.error),
            fmt17(r.bound),
            fmt17(r.ratio)
        ));
    }
    out
}

/// Per instance: sampled worst-case error of the interpolatory algorithm
/// (`key` = number of functionals, `bound` = 2·radius, `ratio` =
/// error/radius) and of the central algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorTwoRow {
    pub row: ReportRow,
    pub radius: f64,
    pub central_error: f64,
}

pub fn factor_two_experiment(
    seeds: &[u64],
    spec: &InstanceSpec,
    sampling: &Sampling,
) -> Result<Vec<FactorTwoRow>> {
    seeds
        .par_iter()
        .enumerate()
        .map(|(id, &seed)| {
            let inst = random_instance(id, seed, spec)?;
            let p = inst.build()?;
            let geo = feasible_geometry(&p, &inst.y)?;
            let interp = interpolatory_algorithm(&p, &inst.y)?;
            let sampling = Sampling { seed, ..*sampling };
            let error = sampled_worst_case_error(&p, &inst.y, &interp, &sampling)?;
            let central_error = sampled_worst_case_error(&p, &inst.y, &geo.center, &sampling)?;
            let ratio = if geo.radius > 0.0 {
                error / geo.radius
            } else {
                0.0
            };
            Ok(FactorTwoRow {
                row: ReportRow {
                    instance_id: id,
                    key: p.info_len() as f64,
                    error,
                    bound: 2.0 * geo.radius,
                    ratio,
                },
                radius: geo.radius,
                central_error,
            })
        })
        .collect()
}

/// For each seed and `λ`, the optimization algorithm on the body with
/// `r = 1`, `δ = 1/λ`: sampled worst-case error against twice the estimated
/// radius.
pub fn lambda_experiment(
    seeds: &[u64],
    lambdas: &[f64],
    max_dim: usize,
    sampling: &Sampling,
) -> Result<Vec<ReportRow>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::usage(format!(
            "λ grid needs finite positive values, got {l}"
        )));
    }
    let jobs: Vec<(usize, u64, f64)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(id, &s)| lambdas.iter().map(move |&l| (id, s, l)))
        .collect();
    jobs.par_iter()
        .map(|&(id, seed, lambda)| {
            let spec = InstanceSpec {
                max_dim,
                r: 1.0,
                delta: 1.0 / lambda,
                full_information: false,
            };
            let inst = random_instance(id, seed, &spec)?;
            let p = inst.build()?;
            let out = optimization_algorithm(&p, &inst.y, lambda)?;
            let geo = feasible_geometry(&p, &inst.y)?;
            let error =
                sampled_worst_case_error(&p, &inst.y, &out, &Sampling { seed, ..*sampling })?;
            let ratio = if geo.radius > 0.0 {
                error / geo.radius
            } else {
                0.0
            };
            Ok(ReportRow {
                instance_id: id,
                key: lambda,
                error,
                bound: 2.0 * geo.radius,
                ratio,
            })
        })
        .collect()
}

/// Nested-information runs on random square instances, `n = 1..=d`.
pub fn asymptotic_batch(seeds: &[u64], max_dim: usize) -> Result<Vec<ReportRow>> {
    let spec = InstanceSpec {
        max_dim,
        r: 1.0,
        delta: 0.0,
        full_information: true,
    };
    let blocks = seeds
        .par_iter()
        .enumerate()
        .map(|(id, &seed)| {
            let inst = random_instance(id, seed, &spec)?;
            let p = inst.build()?;
            let f = inst.f.clone().expect("generated instances record f");
            let ns: Vec<usize> = (1..=p.dim()).collect();
            Ok(asymptotic_experiment(&p, &f, &ns)?
                .into_iter()
                .map(|a| ReportRow {
                    instance_id: id,
                    key: a.n as f64,
                    error: a.error,
                    bound: a.bound,
                    ratio: a.ratio,
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_coordinate(d: usize) -> LinearProblem {
        let mut n = DMatrix::zeros(1, d);
        n[(0, 0)] = 1.0;
        LinearProblem::new(
            DMatrix::identity(d, d),
            n,
            DMatrix::identity(d, d),
            1.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn section_of_unit_ball() {
        let p = first_coordinate(4);
        let g = feasible_geometry(&p, &[0.0]).unwrap();
        assert!((g.radius - 1.0).abs() < 1e-12 && (g.diameter - 2.0).abs() < 1e-12);
        assert!(g.center.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(interpolatory_algorithm(&p, &[0.0]).unwrap(), vec![0.0; 4]);
        let g = feasible_geometry(&p, &[0.6]).unwrap();
        assert!((g.radius - 0.8).abs() < 1e-12);
        assert!((g.center[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn invertible_information() {
        let n = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.0]);
        let s = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let p = LinearProblem::new(s, n, DMatrix::identity(2, 2), 10.0, 0.0).unwrap();
        let y = [3.0, 1.0]; // f = (1, 1)
        let g = feasible_geometry(&p, &y).unwrap();
        assert!(g.radius.abs() < 1e-12);
        assert!((g.center[0] - 2.0).abs() < 1e-12);
        assert!((interpolatory_algorithm(&p, &y).unwrap()[0] - 2.0).abs() < 1e-12);
        assert!((optimization_algorithm(&p, &y, f64::INFINITY).unwrap()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_data() {
        let p = first_coordinate(3);
        assert!(
            matches!(feasible_geometry(&p, &[2.0]), Err(Error::Infeasible { residual, .. }) if (residual - 1.0).abs() < 1e-12)
        );
        let noisy = p.with_body(1.0, 0.5).unwrap();
        assert!(feasible_geometry(&noisy, &[1.4]).is_ok());
        assert!(feasible_geometry(&noisy, &[1.6]).is_err());
    }

    #[test]
    fn validation() {
        let i = DMatrix::<f64>::identity(2, 2);
        let bad_w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(LinearProblem::new(i.clone(), i.clone(), bad_w, 1.0, 0.0).is_err());
        let dep = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(LinearProblem::new(i.clone(), dep, i.clone(), 1.0, 0.0).is_err());
        assert!(LinearProblem::new(i.clone(), i.clone(), i.clone(), 0.0, 0.0).is_err());
        let p = first_coordinate(2);
        assert!(optimization_algorithm(&p, &[0.0], 0.0).is_err());
        assert!(feasible_geometry(&p, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_data_zero_output() {
        let inst = random_instance(0, 5, &InstanceSpec::default()).unwrap();
        let p = inst.build().unwrap();
        let y = vec![0.0; p.info_len()];
        for l in [0.1, 1.0, 10.0, f64::INFINITY] {
            assert!(optimization_algorithm(&p, &y, l)
                .unwrap()
                .iter()
                .all(|v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn noisy_geometry_approaches_exact() {
        let p = first_coordinate(3);
        let exact = feasible_geometry(&p, &[0.3]).unwrap();
        let noisy = feasible_geometry(&p.with_body(1.0, 1e-7).unwrap(), &[0.3]).unwrap();
        assert!(!noisy.exact);
        assert!((noisy.radius - exact.radius).abs() < 1e-3);
    }

    #[test]
    fn diagonal_radii() {
        let w = [1.0, 4.0, 9.0, 16.0];
        let p = diagonal_problem(&w).unwrap();
        let f = [0.3, -0.2, 0.1, 0.05];
        let rows = asymptotic_experiment(&p, &f, &[0, 1, 2, 3, 4]).unwrap();
        for row in &rows[..4] {
            assert!((row.radius - 1.0 / w[row.n].sqrt()).abs() < 1e-12);
            let tail = f[row.n..].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((row.error - tail).abs() < 1e-12);
        }
        assert_eq!(rows[4].error, 0.0);
        assert_eq!(rows[4].radius, 0.0);
    }

    #[test]
    fn record_round_trip() {
        let inst = random_instance(3, 11, &InstanceSpec::default()).unwrap();
        let json = serde_json::to_string(&inst).unwrap();
        let back: LinearInstance = serde_json::from_str(&json).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.build().unwrap().to_record(), inst.problem);
    }
}
