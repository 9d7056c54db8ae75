//! One function per subcommand, each producing CSV text and a JSON value.

use std::fmt::Write as _;

use optrec::equivalence::{self, InstanceSpec, ReportRow, Sampling};
use optrec::estimators;
use optrec::maxent::{self, entropy, MomentConstraints, MomentRecord, ProbVector};
use optrec::quadrature::{self, estimate_exponent, fmt17};
use optrec::settings::{self, Criterion, SmoothnessBall, WienerMeasure};
use optrec::splines::{self, CubicSpline, SmoothingProblem};
use serde_json::{json, Value};

use crate::config::{self, CriterionName, Params, ResolvedConfig};
use crate::CliError;

pub struct Artifact {
    pub csv: String,
    pub json: Value,
}

fn to_json(v: &impl serde::Serialize) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

pub fn execute(cfg: &ResolvedConfig) -> Result<Artifact, CliError> {
    let seed = cfg.seed;
    match &cfg.params {
        Params::QuadConverge(p) => quad_converge(p, seed),
        Params::QuadComplexity(p) => quad_complexity(p),
        Params::SplineFit(p) => {
            let s = splines::natural_cubic_spline(&p.knots, &p.y)
                .map_err(CliError::module("splines"))?;
            Ok(spline_artifact(&s, p.grid_points, None))
        }
        Params::SplineSmooth(p) => {
            let problem = SmoothingProblem::new(p.knots.clone(), p.y.clone(), p.lambda)
                .map_err(CliError::module("splines"))?;
            let s = splines::smoothing_spline(&problem).map_err(CliError::module("splines"))?;
            Ok(spline_artifact(
                &s,
                p.grid_points,
                Some(problem.objective(&s)),
            ))
        }
        Params::SplineCv(p) => {
            let cv = splines::cross_validate_lambda(&p.knots, &p.y, &p.lambdas)
                .map_err(CliError::module("splines"))?;
            let mut csv = String::from("lambda,score,selected\n");
            for s in &cv.scores {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    fmt17(s.lambda),
                    fmt17(s.score),
                    s.lambda == cv.lambda
                );
            }
            Ok(Artifact {
                csv,
                json: to_json(&cv),
            })
        }
        Params::MaxentSolve(r) => maxent_run(r, Method::Entropy),
        Params::MaxentCenter(r) => maxent_run(r, Method::Center),
        Params::MaxentMinmax(r) => maxent_run(r, Method::MinMax),
        Params::EstimateSweep(p) => {
            let rows =
                estimators::sweep(&p.sigmas, &p.taus).map_err(CliError::module("estimators"))?;
            Ok(Artifact {
                csv: estimators::sweep_csv(&rows),
                json: to_json(&rows),
            })
        }
        Params::Compare(p) => compare(p, seed),
        Params::EquivFactor2(p) => equiv_factor2(p, seed),
        Params::EquivLambda(p) => {
            let sampling = Sampling {
                samples: p.samples,
                seed,
                ..Sampling::default()
            };
            let rows = equivalence::lambda_experiment(&p.seeds, &p.lambdas, p.max_dim, &sampling)
                .map_err(CliError::module("equivalence"))?;
            Ok(Artifact {
                csv: equivalence::report_csv("lambda", &rows),
                json: to_json(&rows),
            })
        }
        Params::EquivAsymptotic(p) => {
            let rows = equivalence::asymptotic_batch(&p.seeds, p.max_dim)
                .map_err(CliError::module("equivalence"))?;
            Ok(Artifact {
                csv: equivalence::report_csv("n", &rows),
                json: to_json(&rows),
            })
        }
    }
}

fn quad_converge(p: &config::QuadConverge, seed: u64) -> Result<Artifact, CliError> {
    let f = p.f;
    let reference = p.reference.unwrap_or_else(|| f.integral());
    let report = estimate_exponent(p.rule, |x| f.eval(x), Some(reference), &p.ns, Some(seed))
        .map_err(CliError::module("quadrature"))?;
    Ok(Artifact {
        csv: report.to_csv(),
        json: to_json(&report),
    })
}

fn quad_complexity(p: &config::QuadComplexity) -> Result<Artifact, CliError> {
    let ball = SmoothnessBall::new(p.r, p.bound).map_err(CliError::module("settings"))?;
    let mut csv = String::from("rule,epsilon,n,cost,saturated,slope\n");
    let mut profiles = Vec::new();
    for &rule in &p.rules {
        let prof =
            settings::complexity(rule, &ball, &p.epsilons).map_err(CliError::module("settings"))?;
        let slope = prof
            .slope
            .map(fmt17)
            .unwrap_or_else(|| "insufficient".into());
        for i in 0..prof.epsilons.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{slope}",
                rule.name(),
                fmt17(prof.epsilons[i]),
                prof.ns[i],
                prof.costs[i],
                prof.saturated[i]
            );
        }
        profiles.push(prof);
    }
    Ok(Artifact {
        csv,
        json: to_json(&profiles),
    })
}

fn spline_artifact(s: &CubicSpline<f64>, points: usize, objective: Option<f64>) -> Artifact {
    let grid = s.grid(points);
    let mut csv = String::from("t,s\n");
    for (t, v) in &grid {
        let _ = writeln!(csv, "{},{}", fmt17(*t), fmt17(*v));
    }
    let mut json = json!({
        "spline": to_json(s),
        "bending_energy": splines::bending_energy(s),
        "grid": grid.iter().map(|(t, v)| [*t, *v]).collect::<Vec<_>>(),
    });
    if let Some(o) = objective {
        json["objective"] = json!(o);
    }
    Artifact { csv, json }
}

#[derive(Clone, Copy)]
enum Method {
    Entropy,
    Center,
    MinMax,
}

fn maxent_run(rec: &MomentRecord<f64>, method: Method) -> Result<Artifact, CliError> {
    let err = CliError::module("maxent");
    let c = MomentConstraints::from_record(rec.clone()).map_err(err)?;
    let (name, p, radius): (&str, ProbVector<f64>, Option<f64>) = match method {
        Method::Entropy => ("maxent", maxent::maxent_solve(&c).map_err(err)?.p, None),
        Method::Center => {
            let s = maxent::chebyshev_center(&c).map_err(err)?;
            ("chebyshev-center", s.p, Some(s.radius))
        }
        Method::MinMax => (
            "min-uniform-norm",
            maxent::min_uniform_norm(&c).map_err(err)?.p,
            None,
        ),
    };
    let h = entropy(&p);
    let residual = c.residual(p.as_slice());
    let mut csv = String::from("method,category,p,entropy,residual,radius\n");
    let rad = radius.map(fmt17).unwrap_or_default();
    for (i, v) in p.as_slice().iter().enumerate() {
        let _ = writeln!(
            csv,
            "{name},{i},{},{},{},{rad}",
            fmt17(*v),
            fmt17(h),
            fmt17(residual)
        );
    }
    let mut json = json!({ "method": name, "p": p, "entropy": h, "residual": residual });
    if let Some(r) = radius {
        json["radius"] = json!(r);
    }
    Ok(Artifact { csv, json })
}

fn compare(p: &config::Compare, seed: u64) -> Result<Artifact, CliError> {
    let err = CliError::module("settings");
    let u1 = quadrature::strategy::<f64>(p.first, &p.first_ns).map_err(err)?;
    let u2 = quadrature::strategy::<f64>(p.second, &p.second_ns).map_err(err)?;
    let ball = || SmoothnessBall::new(p.r, p.bound).map_err(err);
    let criterion = match p.criterion {
        CriterionName::Exponent => Criterion::Exponent,
        CriterionName::WorstCase => Criterion::WorstCase { ball: ball()? },
        CriterionName::AverageCase => Criterion::AverageCase {
            measure: WienerMeasure::new(p.fold, p.grid_size).map_err(err)?,
            trials: p.trials,
            seed,
        },
        CriterionName::Complexity => Criterion::Complexity {
            ball: ball()?,
            epsilons: p.epsilons.clone(),
        },
    };
    let verdict = settings::compare(&u1, &u2, &criterion).map_err(err)?;
    Ok(Artifact {
        csv: verdict.to_csv(),
        json: to_json(&verdict),
    })
}

fn equiv_factor2(p: &config::EquivFactor2, seed: u64) -> Result<Artifact, CliError> {
    let err = CliError::module("equivalence");
    let sampling = Sampling {
        samples: p.samples,
        seed,
        ..Sampling::default()
    };
    let rows = match &p.instances {
        None => {
            let spec = InstanceSpec {
                max_dim: p.max_dim,
                ..InstanceSpec::default()
            };
            equivalence::factor_two_experiment(&p.seeds, &spec, &sampling).map_err(err)?
        }
        Some(list) => list
            .iter()
            .map(|inst| {
                let prob = inst.build()?;
                let geo = equivalence::feasible_geometry(&prob, &inst.y)?;
                let out = equivalence::interpolatory_algorithm(&prob, &inst.y)?;
                let error = equivalence::sampled_worst_case_error(&prob, &inst.y, &out, &sampling)?;
                let central_error =
                    equivalence::sampled_worst_case_error(&prob, &inst.y, &geo.center, &sampling)?;
                let ratio = if geo.radius > 0.0 {
                    error / geo.radius
                } else {
                    0.0
                };
                Ok(equivalence::FactorTwoRow {
                    row: ReportRow {
                        instance_id: inst.id,
                        key: prob.info_len() as f64,
                        error,
                        bound: 2.0 * geo.radius,
                        ratio,
                    },
                    radius: geo.radius,
                    central_error,
                })
            })
            .collect::<optrec::Result<Vec<_>>>()
            .map_err(err)?,
    };
    let report: Vec<ReportRow> = rows.iter().map(|r| r.row).collect();
    Ok(Artifact {
        csv: equivalence::report_csv("n", &report),
        json: to_json(&rows),
    })
}
