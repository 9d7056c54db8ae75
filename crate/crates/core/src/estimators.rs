//! Estimating a scalar `f` from `y = f + n`, `n ~ N(0, σ²)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::seeded_rng;
use crate::quadrature::{fmt17, gauss_legendre_rule};
use crate::scalar::Real;

/// Grid resolution of [`worst_case_error`] before golden-section refinement.
pub const WORST_CASE_GRID: usize = 2001;

/// Gaussian integrals are truncated at this many standard deviations.
const TRUNCATION: f64 = 10.0;
const PANELS: usize = 8;
const PANEL_ORDER: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prior<T> {
    None,
    /// `f ∈ [-τ, τ]`.
    Bounded {
        tau: T,
    },
    /// `f ~ N(0, τ²)`.
    Gaussian {
        tau: T,
    },
}

impl<T: Real> Prior<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Prior::None => "none",
            Prior::Bounded { .. } => "bounded",
            Prior::Gaussian { .. } => "gaussian",
        }
    }

    pub fn tau(&self) -> Option<T> {
        match *self {
            Prior::None => None,
            Prior::Bounded { tau } | Prior::Gaussian { tau } => Some(tau),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarEstimationSetting<T> {
    pub sigma: T,
    pub prior: Prior<T>,
}

impl<T: Real> ScalarEstimationSetting<T> {
    pub fn new(sigma: T, prior: Prior<T>) -> Result<Self> {
        check_positive("sigma", sigma)?;
        if let Some(tau) = prior.tau() {
            check_positive("tau", tau)?;
        }
        Ok(Self { sigma, prior })
    }
}

fn check_positive<T: Real>(name: &str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::usage(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// A map `ℝ → ℝ` scored by the error functionals of this module.
pub trait ScalarMap<T: Real>: Sync {
    fn apply(&self, y: T) -> T;

    /// Points where the map is not smooth; quadrature panels are split there.
    fn breakpoints(&self) -> Vec<T> {
        Vec::new()
    }
}

impl<T: Real, F: Fn(T) -> T + Sync> ScalarMap<T> for F {
    fn apply(&self, y: T) -> T {
        self(y)
    }
}

/// `y ↦ a y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear<T>(pub T);

impl<T: Real> ScalarMap<T> for Linear<T> {
    fn apply(&self, y: T) -> T {
        self.0 * y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScalarAlgorithm<T> {
    Identity,
    /// Projection onto `[-τ, τ]`.
    Clamp {
        tau: T,
    },
    /// `y τ² / (τ² + σ²)`.
    Shrink {
        sigma: T,
        tau: T,
    },
}

impl<T: Real> ScalarAlgorithm<T> {
    pub fn name(&self) -> &'static str {
        match self {
            ScalarAlgorithm::Identity => "identity",
            ScalarAlgorithm::Clamp { .. } => "clamp",
            ScalarAlgorithm::Shrink { .. } => "shrink",
        }
    }

    /// The linear factor of `Shrink`.
    pub fn shrink_factor(sigma: T, tau: T) -> T {
        tau * tau / (tau * tau + sigma * sigma)
    }
}

impl<T: Real> ScalarMap<T> for ScalarAlgorithm<T> {
    fn apply(&self, y: T) -> T {
        match *self {
            ScalarAlgorithm::Identity => y,
            ScalarAlgorithm::Clamp { tau } => y.max(-tau).min(tau),
            ScalarAlgorithm::Shrink { sigma, tau } => y * Self::shrink_factor(sigma, tau),
        }
    }

    fn breakpoints(&self) -> Vec<T> {
        match *self {
            ScalarAlgorithm::Clamp { tau } => vec![-tau, tau],
            _ => Vec::new(),
        }
    }
}

/// `∫ g(z) φ(z) dz` for the standard normal density `φ`, by composite
/// Gauss-Legendre on `[-10, 10]` with extra panel edges at `splits`.
fn standard_normal_expectation<T: Real>(mut g: impl FnMut(T) -> T, splits: &[T]) -> Result<T> {
    let (nodes, weights) = gauss_legendre_rule::<T>(PANEL_ORDER)?;
    let lim = T::lit(TRUNCATION);
    let mut edges: Vec<T> = (0..=PANELS)
        .map(|i| -lim + T::lit(2.0 * TRUNCATION * i as f64 / PANELS as f64))
        .collect();
    edges.extend(
        splits
            .iter()
            .copied()
            .filter(|z| z.is_finite() && z.abs() < lim),
    );
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
    edges.dedup();
    let norm = (T::lit(2.0) * T::PI()).sqrt().recip();
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        for (&x, &wt) in nodes.iter().zip(&weights) {
            let z = a + len * x;
            acc = acc + len * wt * g(z) * (-half * z * z).exp() * norm;
        }
    }
    if acc.is_finite() {
        Ok(acc)
    } else {
        Err(Error::numeric("error integral is not finite"))
    }
}

fn pointwise_mse<T: Real>(alg: &impl ScalarMap<T>, f: T, sigma: T) -> Result<T> {
    let splits: Vec<T> = alg
        .breakpoints()
        .into_iter()
        .map(|b| (b - f) / sigma)
        .collect();
    standard_normal_expectation(
        |z| {
            let e = f - alg.apply(f + sigma * z);
            e * e
        },
        &splits,
    )
}

/// Root-mean-square error `e(A, f) = (E |f - A(f + n)|²)^{1/2}`.
pub fn pointwise_error<T: Real>(alg: &impl ScalarMap<T>, f: T, sigma: T) -> Result<T> {
    check_positive("sigma", sigma)?;
    Ok(pointwise_mse(alg, f, sigma)?.sqrt())
}

/// `sup_{|f| <= τ} e(A, f)`: a uniform grid refined by golden-section search.
pub fn worst_case_error<T: Real>(
    alg: &impl ScalarMap<T>,
    setting: &ScalarEstimationSetting<T>,
) -> Result<T> {
    let Prior::Bounded { tau } = setting.prior else {
        return Err(Error::usage("worst-case error needs a bounded prior"));
    };
    let sigma = setting.sigma;
    check_positive("sigma", sigma)?;
    check_positive("tau", tau)?;
    let step = T::lit(2.0) * tau / T::lit((WORST_CASE_GRID - 1) as f64);
    let grid: Vec<T> = (0..WORST_CASE_GRID)
        .map(|i| -tau + step * T::lit(i as f64))
        .collect();
    let values = grid
        .iter()
        .map(|&f| pointwise_mse(alg, f, sigma))
        .collect::<Result<Vec<T>>>()?;
    let (best, mut best_val) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, T::neg_infinity()),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(WORST_CASE_GRID - 1)];
    let ratio = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let tol = T::tol(1e-6) * tau.max(T::one()) * T::lit(1e-3);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = pointwise_mse(alg, c, sigma)?;
    let mut fd = pointwise_mse(alg, d, sigma)?;
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = pointwise_mse(alg, c, sigma)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = pointwise_mse(alg, d, sigma)?;
        }
    }
    best_val = best_val.max(fc).max(fd);
    Ok(best_val.sqrt())
}

/// `(E_f e(A, f)²)^{1/2}` with `f ~ N(0, τ²)`.
pub fn bayes_error<T: Real>(
    alg: &impl ScalarMap<T>,
    setting: &ScalarEstimationSetting<T>,
) -> Result<T> {
    let Prior::Gaussian { tau } = setting.prior else {
        return Err(Error::usage("Bayes error needs a Gaussian prior"));
    };
    let sigma = setting.sigma;
    check_positive("sigma", sigma)?;
    check_positive("tau", tau)?;
    let mut failure = None;
    let mse = standard_normal_expectation(
        |w| match pointwise_mse(alg, tau * w, sigma) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                T::nan()
            }
        },
        &[],
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(mse?.sqrt())
}

/// Mean of a Monte Carlo sample with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub mean: T,
    pub std_error: T,
}

pub(crate) fn sample_mean<T: Real>(xs: impl Iterator<Item = T>) -> Estimate<T> {
    let (mut n, mut mean, mut m2) = (0usize, T::zero(), T::zero());
    for x in xs {
        n += 1;
        let d = x - mean;
        mean = mean + d / T::lit(n as f64);
        m2 = m2 + d * (x - mean);
    }
    let var = if n > 1 {
        m2 / T::lit((n - 1) as f64)
    } else {
        T::zero()
    };
    Estimate {
        mean,
        std_error: (var / T::lit(n.max(1) as f64)).sqrt(),
    }
}

/// Monte Carlo estimate of the mean squared error `e(A, f)²`.
pub fn monte_carlo_pointwise_mse<T: Real>(
    alg: &impl ScalarMap<T>,
    f: T,
    sigma: T,
    samples: usize,
    seed: u64,
) -> Estimate<T> {
    let mut rng = seeded_rng(seed);
    sample_mean((0..samples).map(|_| {
        let z: f64 = rng.sample(StandardNormal);
        let e = f - alg.apply(f + sigma * T::lit(z));
        e * e
    }))
}

/// Monte Carlo estimate of the Bayes mean squared error, drawing `f` then `n`.
pub fn monte_carlo_bayes_mse<T: Real>(
    alg: &impl ScalarMap<T>,
    sigma: T,
    tau: T,
    samples: usize,
    seed: u64,
) -> Estimate<T> {
    let mut rng = seeded_rng(seed);
    sample_mean((0..samples).map(|_| {
        let w: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        let f = tau * T::lit(w);
        let e = f - alg.apply(f + sigma * T::lit(z));
        e * e
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub algorithm: String,
    pub sigma: T,
    pub tau: Option<T>,
    pub prior: String,
    pub error: T,
}

/// Errors of the three built-in algorithms over a `(σ, τ)` grid.
///
/// With no prior only the identity is scored (its error does not depend on
/// `f`); bounded priors use the worst-case error and Gaussian priors the Bayes
/// error. Rows come out in grid order regardless of thread count.
pub fn sweep<T: Real>(sigmas: &[T], taus: &[T]) -> Result<Vec<SweepRow<T>>> {
    let mut jobs = Vec::new();
    for &sigma in sigmas {
        jobs.push(ScalarEstimationSetting::new(sigma, Prior::None)?);
        for &tau in taus {
            jobs.push(ScalarEstimationSetting::new(sigma, Prior::Bounded { tau })?);
            jobs.push(ScalarEstimationSetting::new(
                sigma,
                Prior::Gaussian { tau },
            )?);
        }
    }
    let blocks = jobs
        .par_iter()
        .map(|s| -> Result<Vec<SweepRow<T>>> {
            let row = |alg: ScalarAlgorithm<T>, error: T| SweepRow {
                algorithm: alg.name().into(),
                sigma: s.sigma,
                tau: s.prior.tau(),
                prior: s.prior.name().into(),
                error,
            };
            let Some(tau) = s.prior.tau() else {
                return Ok(vec![row(ScalarAlgorithm::Identity, s.sigma)]);
            };
            let algs = [
                ScalarAlgorithm::Identity,
                ScalarAlgorithm::Clamp { tau },
                ScalarAlgorithm::Shrink {
                    sigma: s.sigma,
                    tau,
                },
            ];
            algs.into_iter()
                .map(|a| {
                    let e = match s.prior {
                        Prior::Gaussian { .. } => bayes_error(&a, s)?,
                        _ => worst_case_error(&a, s)?,
                    };
                    Ok(row(a, e))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

/// CSV with columns `algorithm,sigma,tau,prior,error`.
pub fn sweep_csv<T: Real>(rows: &[SweepRow<T>]) -> String {
    let mut out = String::from("algorithm,sigma,tau,prior,error\n");
    for r in rows {
        let tau = r.tau.map(fmt17).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.algorithm,
            fmt17(r.sigma),
            tau,
            r.prior,
            fmt17(r.error)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(sigma: f64, tau: f64) -> ScalarEstimationSetting<f64> {
        ScalarEstimationSetting::new(sigma, Prior::Gaussian { tau }).unwrap()
    }

    #[test]
    fn apply_examples() {
        assert_eq!(ScalarAlgorithm::Identity.apply(2.7), 2.7);
        assert_eq!(ScalarAlgorithm::Clamp { tau: 1.0 }.apply(1.5), 1.0);
        assert_eq!(ScalarAlgorithm::Clamp { tau: 1.0 }.apply(-3.0), -1.0);
        assert_eq!(
            ScalarAlgorithm::Shrink {
                sigma: 1.0,
                tau: 1.0
            }
            .apply(2.0),
            1.0
        );
    }

    #[test]
    fn pointwise_values() {
        for f in [-3.0_f64, 0.0, 0.4, 10.0] {
            let e = pointwise_error(&ScalarAlgorithm::Identity, f, 0.5).unwrap();
            assert!((e - 0.5).abs() < 1e-12);
        }
        let e = pointwise_error(&ScalarAlgorithm::Clamp { tau: 1.0_f64 }, 0.0, 0.1).unwrap();
        assert!((e - 0.1).abs() < 1e-6);
        let e = pointwise_error(
            &ScalarAlgorithm::Shrink {
                sigma: 1.0_f64,
                tau: 1.0,
            },
            0.0,
            1.0,
        )
        .unwrap();
        assert!((e - 0.5).abs() < 1e-12);
        assert!(pointwise_error(&ScalarAlgorithm::Identity, 0.0, 0.0).is_err());
    }

    #[test]
    fn clamp_at_boundary() {
        // f = τ = σ = 1: E = Φ(2) - 1/2 - 2φ(2) + 4(1 - Φ(2))
        let e = pointwise_error(&ScalarAlgorithm::Clamp { tau: 1.0_f64 }, 1.0, 1.0).unwrap();
        assert!((e - 0.678_430_882_859_972_3).abs() < 1e-12);
    }

    #[test]
    fn bayes_values() {
        let s = gaussian(1.0, 1.0);
        assert!((bayes_error(&ScalarAlgorithm::Identity, &s).unwrap() - 1.0).abs() < 1e-12);
        let shrink = ScalarAlgorithm::Shrink {
            sigma: 1.0,
            tau: 1.0,
        };
        assert!((bayes_error(&shrink, &s).unwrap() - 0.5f64.sqrt()).abs() < 1e-10);
        let s = gaussian(1.0, 1e6);
        let shrink = ScalarAlgorithm::Shrink {
            sigma: 1.0,
            tau: 1e6,
        };
        assert!((bayes_error(&shrink, &s).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn worst_case_values() {
        let s = ScalarEstimationSetting::new(1.0_f64, Prior::Bounded { tau: 1.0 }).unwrap();
        assert!((worst_case_error(&ScalarAlgorithm::Identity, &s).unwrap() - 1.0).abs() < 1e-10);
        assert!(worst_case_error(&ScalarAlgorithm::Clamp { tau: 1.0 }, &s).unwrap() < 1.0 - 1e-3);
        let wide = ScalarEstimationSetting::new(1.0_f64, Prior::Bounded { tau: 1e6 }).unwrap();
        let c = worst_case_error(&ScalarAlgorithm::Clamp { tau: 1e6 }, &wide).unwrap();
        assert!((c - 1.0).abs() < 1e-4);
        assert!(worst_case_error(&ScalarAlgorithm::Identity, &gaussian(1.0, 1.0)).is_err());
    }

    #[test]
    fn settings_validation() {
        assert!(ScalarEstimationSetting::new(0.0, Prior::<f64>::None).is_err());
        assert!(ScalarEstimationSetting::new(1.0, Prior::Bounded { tau: -1.0 }).is_err());
    }

    #[test]
    fn sweep_rows() {
        let rows = sweep(&[1.0_f64], &[0.5, 2.0]).unwrap();
        assert_eq!(rows.len(), 1 + 2 * 6);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("algorithm,sigma,tau,prior,error\nidentity,"));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }

    #[test]
    fn f32_bayes() {
        let s = ScalarEstimationSetting::new(1.0_f32, Prior::Gaussian { tau: 1.0 }).unwrap();
        let e = bayes_error(
            &ScalarAlgorithm::Shrink {
                sigma: 1.0,
                tau: 1.0,
            },
            &s,
        )
        .unwrap();
        assert!((e - 0.5f32.sqrt()).abs() < 1e-5);
    }
}
