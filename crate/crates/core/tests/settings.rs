use optrec::model::{Algorithm, InformationOperator, Member, NoiseModel, Strategy};
use optrec::quadrature::strategy;
use optrec::settings::*;
use optrec::{QuadratureKind, QuadratureRule};
use proptest::prelude::*;

fn rule(kind: QuadratureKind, n: usize) -> QuadratureRule {
    QuadratureRule::new(kind, n).unwrap()
}

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powi(-k)).collect()
}

#[test]
fn bracket_never_inverts() {
    for (kind, r) in [
        (QuadratureKind::Trapezoid, 2),
        (QuadratureKind::Trapezoid, 3),
        (QuadratureKind::Simpson, 4),
    ] {
        let ball = SmoothnessBall::new(r, 1.0).unwrap();
        for n in [1usize, 2, 3, 8, 16] {
            let q = rule(kind, n);
            let lo = worst_case_error_lower(&q.member().unwrap(), &ball).unwrap();
            let hi = worst_case_error_upper(&q, &ball).unwrap();
            assert!(lo <= hi * (1.0 + 1e-9), "{kind:?} r={r} n={n}: {lo} > {hi}");
            assert!(lo > 0.0);
        }
    }
}

#[test]
fn bounds_meet_on_extremal_monomials() {
    // x²/2 and x⁴/24 attain the classical error constants
    for (kind, r) in [(QuadratureKind::Trapezoid, 2), (QuadratureKind::Simpson, 4)] {
        let ball = SmoothnessBall::new(r, 1.0).unwrap();
        for n in [1usize, 4, 10] {
            let q = rule(kind, n);
            let lo = worst_case_error_lower(&q.member().unwrap(), &ball).unwrap();
            let hi = worst_case_error_upper(&q, &ball).unwrap();
            assert!((lo - hi).abs() <= 1e-9 * hi, "{kind:?} n={n}: {lo} vs {hi}");
        }
    }
}

#[test]
fn lower_bound_includes_the_offset_of_affine_algorithms() {
    let ball = SmoothnessBall::new(2, 1.0).unwrap();
    let info = InformationOperator::fixed((0.0, 1.0), vec![0.0, 1.0], NoiseModel::Exact).unwrap();
    let base = Member::new(Algorithm::WeightedSum(vec![0.5, 0.5]), info.clone());
    let shifted = Member::new(
        Algorithm::custom(|y: &[f64]| Ok(0.5 * (y[0] + y[1]) + 0.25)),
        info,
    );
    let a = worst_case_error_lower(&base, &ball).unwrap();
    let b = worst_case_error_lower(&shifted, &ball).unwrap();
    assert!(b >= a + 0.25 - 1e-12);
}

#[test]
fn search_is_seeded() {
    let ball = SmoothnessBall::new(4, 1.0).unwrap();
    let m = rule(QuadratureKind::Simpson, 2).member().unwrap();
    let s = BumpSearch {
        seed: 9,
        ..BumpSearch::default()
    };
    assert_eq!(
        worst_case_error_lower_with(&m, &ball, &s).unwrap(),
        worst_case_error_lower_with(&m, &ball, &s).unwrap()
    );
}

#[test]
fn complexity_costs_grow_and_match_exponent() {
    let ball = SmoothnessBall::new(4, 1.0).unwrap();
    for (kind, eps, want) in [
        (QuadratureKind::Trapezoid, decades(6, 14), 0.5),
        (QuadratureKind::Simpson, decades(8, 16), 0.25),
    ] {
        let p = complexity(kind, &ball, &eps).unwrap();
        assert!(p.costs.windows(2).all(|w| w[0] <= w[1]));
        let slope = p.slope.unwrap();
        assert!((slope - want).abs() <= 0.05, "{kind:?}: {slope}");
        for (i, &n) in p.ns.iter().enumerate() {
            let q = rule(kind, n);
            assert!(worst_case_error_upper(&q, &ball).unwrap() <= eps[i]);
            if n > 1 {
                assert!(worst_case_error_upper(&rule(kind, n - 1), &ball).unwrap() > eps[i]);
            }
        }
    }
}

#[test]
fn complexity_profile_on_desk_range() {
    let ball = SmoothnessBall::new(4, 1.0).unwrap();
    let p = complexity(QuadratureKind::Simpson, &ball, &decades(2, 8)).unwrap();
    assert_eq!(
        p.saturated,
        vec![true, true, false, false, false, false, false]
    );
    assert_eq!(p.costs[0], 3);
    assert!(p.to_csv().starts_with("epsilon,n,cost,saturated\n"));
}

#[test]
fn wiener_covariance_is_min() {
    let w = WienerMeasure::new(0, WienerMeasure::DEFAULT_GRID).unwrap();
    let pairs = [(0.1, 0.9), (0.25, 0.5), (0.5, 0.5), (0.7, 0.3), (1.0, 0.8)];
    for (est, (s, t)) in w.covariance(&pairs, 10_000, 5).iter().zip(pairs) {
        assert!(
            (est.mean - s.min(t)).abs() <= 3.0 * est.std_error,
            "({s},{t}): {est:?}"
        );
    }
}

#[test]
fn once_integrated_covariance() {
    // E X(s) X(t) for X = ∫W is s²(3t - s)/6 when s <= t
    let w = WienerMeasure::new(1, 1025).unwrap();
    let pairs = [(0.3, 0.6), (1.0, 1.0)];
    for (est, (s, t)) in w.covariance(&pairs, 10_000, 6).iter().zip(pairs) {
        let want = s * s * (3.0 * t - s) / 6.0;
        assert!(
            (est.mean - want).abs() <= 3.0 * est.std_error + 1e-4,
            "{est:?} vs {want}"
        );
    }
}

#[test]
fn trapezoid_average_error_on_brownian_paths() {
    // the error is Gaussian with variance 1/(12 n²) - 1/(12 N²) on an aligned grid
    let big_n = 4096.0;
    let w = WienerMeasure::new(0, 4097).unwrap();
    for n in [2usize, 8] {
        let m = rule(QuadratureKind::Trapezoid, n).member().unwrap();
        let est = average_case_error(&m, &w, 4000, 17).unwrap();
        let sd = (1.0 / (12.0 * (n * n) as f64) - 1.0 / (12.0 * big_n * big_n)).sqrt();
        let want = sd * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (est.mean - want).abs() <= 3.0 * est.std_error,
            "n={n}: {est:?} vs {want}"
        );
    }
}

#[test]
fn average_case_guards() {
    let m = rule(QuadratureKind::Trapezoid, 100).member().unwrap();
    assert!(
        average_case_error(&m, &WienerMeasure::new(0, 50).unwrap(), 200, 0)
            .unwrap_err()
            .is_usage()
    );
    assert!(
        average_case_error(&m, &WienerMeasure::new(0, 4096).unwrap(), 10, 0)
            .unwrap_err()
            .is_usage()
    );
}

#[test]
fn simpson_beats_trapezoid() {
    let s = strategy::<f64>(QuadratureKind::Simpson, &[2, 4, 8, 16, 32, 64]).unwrap();
    let t = strategy::<f64>(QuadratureKind::Trapezoid, &[2, 4, 8, 16, 32, 64]).unwrap();
    let ball = SmoothnessBall::new(4, 1.0).unwrap();
    for c in [
        Criterion::Exponent,
        Criterion::Complexity {
            ball,
            epsilons: decades(2, 8),
        },
    ] {
        assert_eq!(
            compare(&s, &t, &c).unwrap().outcome,
            Outcome::FirstNotWorse,
            "{c:?}"
        );
        assert_eq!(
            compare(&t, &s, &c).unwrap().outcome,
            Outcome::SecondNotWorse,
            "{c:?}"
        );
        assert_eq!(compare(&s, &s, &c).unwrap().outcome, Outcome::Equivalent);
    }
}

fn weighted(nodes: Vec<f64>) -> Member<f64> {
    let w = vec![1.0 / nodes.len() as f64; nodes.len()];
    Member::new(
        Algorithm::WeightedSum(w),
        InformationOperator::fixed((0.0, 1.0), nodes, NoiseModel::Exact).unwrap(),
    )
}

#[test]
fn incomparable_pair_exists() {
    let x = Strategy::new("x", vec![weighted(vec![0.5]), weighted(vec![0.5, 0.52])]).unwrap();
    let y = Strategy::new("y", vec![weighted(vec![0.0]), weighted(vec![0.25, 0.75])]).unwrap();
    let c = Criterion::WorstCase {
        ball: SmoothnessBall::new(2, 1.0).unwrap(),
    };
    let v = compare(&x, &y, &c).unwrap();
    assert_eq!(v.outcome, Outcome::Incomparable, "{v:?}");
    assert!(v.rows[0].first < v.rows[0].second && v.rows[1].first > v.rows[1].second);
}

#[test]
fn average_case_verdicts_are_deterministic() {
    let s = strategy::<f64>(QuadratureKind::Simpson, &[2, 4, 8]).unwrap();
    let t = strategy::<f64>(QuadratureKind::Trapezoid, &[2, 4, 8]).unwrap();
    let c = Criterion::AverageCase {
        measure: WienerMeasure::new(1, 1025).unwrap(),
        trials: 500,
        seed: 3,
    };
    let a = compare(&s, &t, &c).unwrap();
    assert_eq!(a, compare(&s, &t, &c).unwrap());
    assert_eq!(a.to_csv(), compare(&s, &t, &c).unwrap().to_csv());
}

#[test]
fn unsupported_inputs() {
    let ball = SmoothnessBall::new(4, 1.0).unwrap();
    let mc = rule(QuadratureKind::MonteCarlo, 8).member().unwrap();
    assert!(matches!(
        worst_case_error_lower(&mc, &ball),
        Err(optrec::Error::Unsupported(_))
    ));
    assert!(worst_case_error_upper(
        &rule(QuadratureKind::Simpson, 2),
        &SmoothnessBall::new(2, 1.0).unwrap()
    )
    .is_err());
    assert!(complexity(QuadratureKind::Trapezoid, &ball, &[1e-3, 1e-2]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn bracket_holds_for_any_n(n in 1usize..40, seed in any::<u64>()) {
        let ball = SmoothnessBall::new(2, 1.0).unwrap();
        let q = rule(QuadratureKind::Trapezoid, n);
        let s = BumpSearch { restarts: 2, steps: 50, seed };
        let lo = worst_case_error_lower_with(&q.member().unwrap(), &ball, &s).unwrap();
        prop_assert!(lo <= worst_case_error_upper(&q, &ball).unwrap() * (1.0 + 1e-9));
    }

    #[test]
    fn verdicts_are_antisymmetric(a in 1usize..5, b in 1usize..5) {
        let ns1: Vec<usize> = (0..4).map(|k| a << k).collect();
        let ns2: Vec<usize> = (0..4).map(|k| b << k).collect();
        let u1 = strategy::<f64>(QuadratureKind::Trapezoid, &ns1).unwrap();
        let u2 = strategy::<f64>(QuadratureKind::Simpson, &ns2).unwrap();
        let ball = SmoothnessBall::new(4, 1.0).unwrap();
        let c = Criterion::WorstCase { ball };
        let fwd = compare(&u1, &u2, &c).unwrap();
        let back = compare(&u2, &u1, &c).unwrap();
        let strict = fwd.rows.iter().any(|r| r.first < r.second * (1.0 - 1e-6));
        if fwd.outcome == Outcome::FirstNotWorse && strict {
            prop_assert!(!fwd.outcome.second_not_worse());
        }
        let mirrored = match fwd.outcome {
            Outcome::FirstNotWorse => Outcome::SecondNotWorse,
            Outcome::SecondNotWorse => Outcome::FirstNotWorse,
            o => o,
        };
        prop_assert_eq!(back.outcome, mirrored);
    }
}
