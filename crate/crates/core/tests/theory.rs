use bomuse_core::theory::{
    audit_hadamard_bounds, audit_mean_monotonicity, audit_variance_bracket, check_hadamard_mean_bounds,
    check_mean_monotonicity, generalized_mean, posterior_variance_bracket, MeanOrder,
};
use bomuse_core::{Error, GpPosterior, KernelSpec, Observation, Source};
use proptest::prelude::*;

fn direct_mean(theta: f64, a: &[f64]) -> f64 {
    (a.iter().map(|v| v.powf(theta)).sum::<f64>() / a.len() as f64).powf(1.0 / theta)
}

#[test]
fn audits_find_no_violations() {
    let m = audit_mean_monotonicity(10_000, 1, &generalized_mean).unwrap();
    assert_eq!(m.violations, 0, "{m:?}");
    let h = audit_hadamard_bounds(10_000, 2, &generalized_mean).unwrap();
    assert_eq!(h.violations, 0, "{h:?}");
    let (up, lo) = audit_variance_bracket(100, 3).unwrap();
    assert_eq!(up.violations, 0, "{up:?}");
    assert!(up.hard && !lo.hard);
}

#[test]
fn audits_catch_a_broken_mean() {
    // swaps the order's sign, which reverses monotonicity
    let broken = |o: MeanOrder<f64>, a: &[f64]| generalized_mean(MeanOrder(-o.0), a);
    assert!(audit_mean_monotonicity(2_000, 1, &broken).unwrap().violations > 0);
    assert!(audit_hadamard_bounds(2_000, 2, &broken).unwrap().violations > 0);
}

#[test]
fn domain_errors() {
    assert!(matches!(generalized_mean(MeanOrder(1.0), &[1.0, -2.0]), Err(Error::Domain { .. })));
    assert!(matches!(generalized_mean(MeanOrder(1.0), &[0.0]), Err(Error::Domain { .. })));
    assert!(generalized_mean::<f64>(MeanOrder(1.0), &[]).is_err());
    assert!(check_mean_monotonicity(&[1.0, 2.0], MeanOrder(2.0), MeanOrder(1.0)).is_err());
}

#[test]
fn hadamard_example_by_hand() {
    // a = (1, 4), b = (4, 1): min(a⊙b) = 4; z = 1, q = 2 gives M_{-1}(a)M_1(b) = 1.6 · 2.5 = 4
    let r = check_hadamard_mean_bounds(&[1.0f64, 4.0], &[4.0, 1.0], 1.0, 2.0).unwrap();
    assert_eq!(r.lhs, 4.0);
    assert!((r.dual_orders.rhs - 4.0).abs() < 1e-12);
    assert!(r.all_hold());
}

#[test]
fn bracket_needs_stationary_kernel() {
    let data = vec![Observation::new(vec![0.0], 1.0, Source::Init)];
    let gp = GpPosterior::fit(KernelSpec::linear(1.0), data, 0.1).unwrap();
    assert!(matches!(posterior_variance_bracket(&gp, &[0.5]), Err(Error::Unsupported(_))));
}

fn positive_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-2..1e2f64, 1..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_direct_formula(a in positive_vec(), theta in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]) {
        let m = generalized_mean(MeanOrder(theta), &a).unwrap();
        let d = direct_mean(theta, &a);
        prop_assert!((m - d).abs() <= 1e-10 * d);
    }

    #[test]
    fn homogeneous_of_degree_one(a in positive_vec(), c in 1e-2..1e2f64, theta in -30.0..30.0f64) {
        let scaled: Vec<f64> = a.iter().map(|v| c * v).collect();
        let lhs = generalized_mean(MeanOrder(theta), &scaled).unwrap();
        let rhs = c * generalized_mean(MeanOrder(theta), &a).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
    }

    #[test]
    fn continuous_at_zero(a in positive_vec(), eps in 1e-9..1e-6f64) {
        let g = generalized_mean(MeanOrder(0.0), &a).unwrap();
        for t in [eps, -eps] {
            let m = generalized_mean(MeanOrder(t), &a).unwrap();
            prop_assert!((m - g).abs() <= 1e-4 * g);
        }
    }

    #[test]
    fn between_min_and_max(a in positive_vec(), theta in -200.0..200.0f64) {
        let m = generalized_mean(MeanOrder(theta), &a).unwrap();
        let lo = a.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(m >= lo * (1.0 - 1e-12) && m <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn monotone_in_order(a in positive_vec(), t1 in -50.0..50.0f64, dt in 0.0..50.0f64) {
        prop_assert!(check_mean_monotonicity(&a, MeanOrder(t1), MeanOrder(t1 + dt)).unwrap());
    }

    #[test]
    fn upper_variance_bound_holds(
        xs in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 1..15),
        x_star in prop::collection::vec(-2.0..2.0f64, 2),
        l in 0.1..3.0f64,
        noise in 1e-4..1.0f64,
    ) {
        let data = xs.into_iter().map(|x| Observation::new(x, 0.0, Source::Init)).collect();
        let gp = GpPosterior::fit(KernelSpec::squared_exponential(l, 1.0), data, noise).unwrap();
        let br = posterior_variance_bracket(&gp, &x_star).unwrap();
        prop_assert!(br.within_upper, "{:?}", br);
    }
}
