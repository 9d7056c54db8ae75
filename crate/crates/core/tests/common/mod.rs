//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Symmetric band matrix, lower half: `band[i][k]` is entry `(i, i - k)`.
pub struct Band {
    pub width: usize,
    pub band: Vec<Vec<f64>>,
}

impl Band {
    pub fn zeros(n: usize, width: usize) -> Self {
        Self {
            width,
            band: vec![vec![0.0; width + 1]; n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        self.band[i][i - j] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.width {
            0.0
        } else {
            self.band[i][i - j]
        }
    }

    /// Fixes unknown `k` to `v`, keeping the system symmetric.
    pub fn pin(&mut self, rhs: &mut [f64], k: usize, v: f64) {
        let n = self.band.len();
        for j in k.saturating_sub(self.width)..(k + self.width + 1).min(n) {
            if j != k {
                rhs[j] -= self.get(j, k) * v;
                let (a, b) = if j >= k { (j, k) } else { (k, j) };
                self.band[a][a - b] = 0.0;
            }
        }
        self.band[k][0] = 1.0;
        rhs[k] = v;
    }

    /// Cholesky solve.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.band.len();
        let w = self.width;
        let mut l = vec![vec![0.0; w + 1]; n];
        for i in 0..n {
            for k in (1..=w.min(i)).rev() {
                let j = i - k;
                let mut s = self.band[i][k];
                for m in 1..=w {
                    if k + m <= w && m <= j {
                        s -= l[i][k + m] * l[j][m];
                    }
                }
                l[i][k] = s / l[j][0];
            }
            let d = self.band[i][0] - (1..=w.min(i)).map(|k| l[i][k] * l[i][k]).sum::<f64>();
            assert!(d > 0.0, "band matrix is not positive definite at row {i}");
            l[i][0] = d.sqrt();
        }
        let mut x = rhs.to_vec();
        for i in 0..n {
            let s: f64 = (1..=w.min(i)).map(|k| l[i][k] * x[i - k]).sum();
            x[i] = (x[i] - s) / l[i][0];
        }
        for i in (0..n).rev() {
            let s: f64 = (1..=w)
                .filter(|&k| i + k < n)
                .map(|k| l[i + k][k] * x[i + k])
                .sum();
            x[i] = (x[i] - s) / l[i][0];
        }
        x
    }
}

/// Minimizer of `∫ f''²` over C¹ piecewise cubic Hermite elements on a grid
/// refining the knots, subject to `f(t_i) = y_i`.
pub struct HermiteFe {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

fn beam_element(h: f64) -> [[f64; 4]; 4] {
    let (h2, h3) = (h * h, h * h * h);
    [
        [12.0 / h3, 6.0 / h2, -12.0 / h3, 6.0 / h2],
        [6.0 / h2, 4.0 / h, -6.0 / h2, 2.0 / h],
        [-12.0 / h3, -6.0 / h2, 12.0 / h3, -6.0 / h2],
        [6.0 / h2, 2.0 / h, -6.0 / h2, 4.0 / h],
    ]
}

impl HermiteFe {
    pub fn solve(knots: &[f64], y: &[f64], elements: usize) -> Self {
        let per = elements.div_ceil(knots.len() - 1).max(1);
        let mut nodes = Vec::new();
        let mut pinned = Vec::new();
        for (i, w) in knots.windows(2).enumerate() {
            pinned.push((nodes.len(), y[i]));
            for k in 0..per {
                nodes.push(w[0] + (w[1] - w[0]) * k as f64 / per as f64);
            }
        }
        pinned.push((nodes.len(), y[y.len() - 1]));
        nodes.push(knots[knots.len() - 1]);

        let n = 2 * nodes.len();
        let mut a = Band::zeros(n, 3);
        for e in 0..nodes.len() - 1 {
            let k = beam_element(nodes[e + 1] - nodes[e]);
            for r in 0..4 {
                for c in 0..=r {
                    a.add(2 * e + r, 2 * e + c, k[r][c]);
                }
            }
        }
        let mut rhs = vec![0.0; n];
        for &(node, v) in &pinned {
            a.pin(&mut rhs, 2 * node, v);
        }
        let x = a.solve(&rhs);
        Self {
            values: x.iter().step_by(2).copied().collect(),
            slopes: x.iter().skip(1).step_by(2).copied().collect(),
            nodes,
        }
    }

    /// `∫ f''²`, from the linear second derivative on each element.
    pub fn energy(&self) -> f64 {
        (0..self.nodes.len() - 1)
            .map(|e| {
                let h = self.nodes[e + 1] - self.nodes[e];
                let (v0, s0, v1, s1) = (
                    self.values[e],
                    self.slopes[e] * h,
                    self.values[e + 1],
                    self.slopes[e + 1] * h,
                );
                let m0 = (6.0 * (v1 - v0) - 4.0 * s0 - 2.0 * s1) / (h * h);
                let m1 = (6.0 * (v0 - v1) + 2.0 * s0 + 4.0 * s1) / (h * h);
                h * (m0 * m0 + m0 * m1 + m1 * m1) / 3.0
            })
            .sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let e = self
            .nodes
            .partition_point(|&t| t <= x)
            .clamp(1, self.nodes.len() - 1)
            - 1;
        let (a, b) = (self.nodes[e], self.nodes[e + 1]);
        let h = b - a;
        let t = (x - a) / h;
        let h00 = 2.0 * t.powi(3) - 3.0 * t * t + 1.0;
        let h10 = t.powi(3) - 2.0 * t * t + t;
        let h01 = -2.0 * t.powi(3) + 3.0 * t * t;
        let h11 = t.powi(3) - t * t;
        h00 * self.values[e]
            + h10 * h * self.slopes[e]
            + h01 * self.values[e + 1]
            + h11 * h * self.slopes[e + 1]
    }
}

/// `c·(t-a)³(b-t)³` on `[a, b]`, zero elsewhere: C² and vanishing with two
/// derivatives at both ends.
#[derive(Debug, Clone, Copy)]
pub struct Bump {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Bump {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.a || t >= self.b {
            return 0.0;
        }
        self.c * (t - self.a).powi(3) * (self.b - t).powi(3)
    }

    pub fn second(&self, t: f64) -> f64 {
        if t <= self.a || t >= self.b {
            return 0.0;
        }
        let (u, v) = (t - self.a, self.b - t);
        self.c * (6.0 * u * v.powi(3) - 18.0 * u * u * v * v + 6.0 * u.powi(3) * v)
    }
}

/// Random bumps between consecutive knots, scaled to order-one amplitude.
pub fn random_bumps(knots: &[f64], rng: &mut impl Rng) -> Vec<Bump> {
    let mut out = Vec::new();
    for w in knots.windows(2) {
        if rng.random_bool(0.6) {
            let peak = ((w[1] - w[0]) / 2.0).powi(6);
            out.push(Bump {
                a: w[0],
                b: w[1],
                c: rng.random_range(-1.0..1.0) / peak,
            });
        }
    }
    out
}

/// `∫_a^b g` by 16-point Gauss-Legendre on each of `pieces` panels, with
/// nodes computed here from the Legendre recurrence.
pub fn integrate(g: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let (x, w) = legendre16();
    let h = (b - a) / pieces as f64;
    let mut acc = 0.0;
    for p in 0..pieces {
        let lo = a + h * p as f64;
        for (xi, wi) in x.iter().zip(&w) {
            acc += wi * h / 2.0 * g(lo + h * (xi + 1.0) / 2.0);
        }
    }
    acc
}

fn legendre16() -> (Vec<f64>, Vec<f64>) {
    let n = 16;
    let mut xs = Vec::new();
    let mut ws = Vec::new();
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                let w = 2.0 / ((1.0 - x * x) * dp * dp);
                xs.push(x);
                ws.push(w);
                break;
            }
        }
    }
    (xs, ws)
}

/// Least-squares line `(slope, intercept)` through `(t_i, y_i)`.
pub fn ls_line(t: &[f64], y: &[f64]) -> (f64, f64) {
    let n = t.len() as f64;
    let mt = t.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - mt) * (b - my)).sum();
    let sxx: f64 = t.iter().map(|a| (a - mt) * (a - mt)).sum();
    let b = sxy / sxx;
    (b, my - b * mt)
}

pub fn shannon(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| v * v.ln())
        .sum::<f64>()
}

/// Orthonormal basis of `{z : rows·z = 0, Σ z = 0}`.
pub fn simplex_null_space(m: usize, rows: &[Vec<f64>]) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::from_element(rows.len() + 1, m, 1.0);
    for (i, r) in rows.iter().enumerate() {
        for j in 0..m {
            a[(i, j)] = r[j];
        }
    }
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let rank = svd.singular_values.iter().filter(|&&s| s > 1e-10).count();
    // complete the row space to a basis of R^m by Gram-Schmidt on unit vectors
    let mut basis: Vec<DVector<f64>> = (0..rank).map(|i| vt.row(i).transpose()).collect();
    let mut null = Vec::new();
    for e in 0..m {
        let mut v = DVector::<f64>::zeros(m);
        v[e] = 1.0;
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let nv = v.norm();
        if nv > 1e-8 {
            let v = v / nv;
            basis.push(v.clone());
            null.push(v);
        }
    }
    if null.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&null)
    }
}

/// Points of `F(y)` by rejection: `p0 + Z z` with `z` uniform in a box that
/// contains the whole feasible set, kept when nonnegative.
pub fn feasible_samples(
    p0: &[f64],
    rows: &[Vec<f64>],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let m = p0.len();
    let z = simplex_null_space(m, rows);
    let k = z.ncols();
    if k == 0 {
        return vec![p0.to_vec(); count];
    }
    let box_half = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        assert!(tries < 50_000_000, "rejection sampler stalled");
        let c = DVector::<f64>::from_fn(k, |_, _| rng.random_range(-box_half..box_half));
        let p = DVector::from_column_slice(p0) + &z * c;
        if p.iter().all(|&v| v >= 0.0) {
            out.push(p.iter().copied().collect());
        }
    }
    out
}

/// `E[(f - A(f + σZ))²]` by dense Simpson over `z ∈ [-12, 12]`.
pub fn pointwise_mse_oracle(alg: impl Fn(f64) -> f64, f: f64, sigma: f64) -> f64 {
    let n = 40_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let g = |z: f64| {
        let e = f - alg(f + sigma * z);
        e * e * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    };
    let mut s = g(a) + g(b);
    for i in 1..n {
        s += g(a + h * i as f64) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
