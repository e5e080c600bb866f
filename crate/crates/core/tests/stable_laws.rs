use markov_stable::harness::empirical_cf;
use markov_stable::stable::{
    levy_exponent_truncated, sample_stable, strictly_stable_cf, strictly_stable_exponent, StableParams,
    SymmetricStableScale,
};
use markov_stable::tails::{hill_estimate, solve_bn, ImageLaw, SlowlyVarying, TailModel, TwoSidedPareto};
use num_complex::Complex;
use proptest::prelude::*;
use std::f64::consts::FRAC_PI_2;

fn alpha_not_one() -> impl Strategy<Value = f64> {
    prop_oneof![0.1..0.97f64, 1.03..1.95f64]
}

/// −(c₊ + c₋) Γ(1−α) cos(πα/2) |θ|^α, the real part of the exponent.
fn symmetric_closed_form(theta: f64, alpha: f64, c: f64) -> f64 {
    -2.0 * c * statrs::function::gamma::gamma(1.0 - alpha) * (FRAC_PI_2 * alpha).cos() * theta.abs().powf(alpha)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cf_modulus_at_most_one(a in alpha_not_one(), cp in 0.0..1.0f64, cm in 0.0..1.0f64, th in -20.0..20.0f64) {
        prop_assume!(cp + cm > 1e-3);
        let z = strictly_stable_cf(th, a, cp, cm).unwrap();
        prop_assert!(z.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn exponent_is_hermitian(a in alpha_not_one(), cp in 0.0..1.0f64, cm in 0.0..1.0f64, th in 0.01..20.0f64) {
        prop_assume!(cp + cm > 1e-3);
        let p = strictly_stable_exponent(th, a, cp, cm).unwrap();
        let q = strictly_stable_exponent(-th, a, cp, cm).unwrap();
        prop_assert!((p.conj() - q).norm() <= 1e-12 * (1.0 + p.norm()));
    }

    #[test]
    fn exponent_is_self_similar(a in alpha_not_one(), cp in 0.0..1.0f64, cm in 0.0..1.0f64, th in 0.05..5.0f64, t in 0.1..10.0f64) {
        prop_assume!(cp + cm > 1e-3);
        let p = strictly_stable_exponent(th, a, cp, cm).unwrap();
        let q = strictly_stable_exponent(t * th, a, cp, cm).unwrap();
        prop_assert!((q - p * t.powf(a)).norm() <= 1e-10 * (1.0 + q.norm()));
    }

    #[test]
    fn symmetric_exponent_matches_gamma_form(a in alpha_not_one(), c in 0.05..2.0f64, th in -10.0..10.0f64) {
        let p = strictly_stable_exponent(th, a, c, c).unwrap();
        let want = symmetric_closed_form(th, a, c);
        prop_assert!((p.re - want).abs() <= 1e-10 * (1.0 + want.abs()), "{} vs {}", p.re, want);
        prop_assert!(p.im.abs() <= 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn truncation_only_shifts_the_exponent(a in alpha_not_one(), cp in 0.0..1.0f64, cm in 0.0..1.0f64, h in 0.2..5.0f64) {
        prop_assume!(cp + cm > 1e-3);
        let p = StableParams::strictly_stable(a, cp, cm, h).unwrap();
        // Φ^h(θ) − strict(θ) is linear in θ and purely imaginary.
        let d = |th: f64| levy_exponent_truncated(th, &p).unwrap() - strictly_stable_exponent(th, a, cp, cm).unwrap();
        let (d1, d2) = (d(1.0), d(2.5));
        prop_assert!(d1.re.abs() < 1e-10 && d2.re.abs() < 1e-10);
        prop_assert!((d2.im - 2.5 * d1.im).abs() < 1e-9 * (1.0 + d2.im.abs()));
    }

    #[test]
    fn bn_increasing_and_solves_its_equation(a in 0.3..1.95f64, ell in 0.1..5.0f64, c in 0.05..1.0f64, n in 1u64..1_000_000) {
        let tm = TailModel::new(a, SlowlyVarying::Constant(ell), c, c).unwrap();
        let b1 = solve_bn(n, &tm).unwrap();
        let b2 = solve_bn(n + 1, &tm).unwrap();
        prop_assert!(b2 > b1);
        let resid = n as f64 * ell / b1.powf(a) - 2.0 * c;
        prop_assert!(resid.abs() < 1e-9 * 2.0 * c);
    }

    #[test]
    fn pareto_quantile_inverts_cdf(a in 0.3..1.95f64, cp in 0.05..1.0f64, cm in 0.05..1.0f64, u in 0.0001..0.9999f64) {
        let p = TwoSidedPareto::new(a, cp, cm).unwrap();
        let x = p.quantile(u);
        prop_assert!((p.cdf(x) - u).abs() < 1e-12);
    }
}

#[test]
fn symmetric_one_stable_is_cauchy() {
    for &c in &[0.25, 0.5, 1.0] {
        for &th in &[-3.0, -0.5, 0.7, 4.0] {
            let z = strictly_stable_cf(th, 1.0, c, c).unwrap();
            let want = (-2.0 * c * FRAC_PI_2 * f64::abs(th)).exp();
            assert!((z - Complex::new(want, 0.0)).norm() < 1e-12);
        }
    }
    assert!(strictly_stable_cf(1.0, 1.0, 0.6, 0.4).is_err());
}

#[test]
fn skewed_sampler_matches_cf() {
    let thetas = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
    for &(a, cp, cm) in &[(0.7, 0.8, 0.2), (1.5, 0.3, 0.9), (1.2, 1.0, 0.0)] {
        let p = StableParams::strictly_stable(a, cp, cm, 1.0).unwrap();
        let p = StableParams { a_h: 0.0, ..p };
        let xs = sample_stable(&p, 40_000, 11).unwrap();
        let emp = empirical_cf(&xs, &thetas);
        for (th, e) in thetas.iter().zip(&emp) {
            let want = markov_stable::stable::truncated_cf(*th, &p).unwrap();
            assert!((e - want).norm() < 0.03, "alpha {a} theta {th}: {e} vs {want}");
        }
    }
}

#[test]
fn symmetric_scale_parametrization() {
    let s = SymmetricStableScale::new(1.5, 0.4).unwrap();
    let z = s.cf(1.3).unwrap();
    assert!((z - strictly_stable_cf(1.3, 1.5, 0.4, 0.4).unwrap()).norm() < 1e-14);
    assert!(SymmetricStableScale::new(2.5, 1.0).is_err());
}

#[test]
fn hill_recovers_pareto_index() {
    use rand::SeedableRng;
    let law = ImageLaw::Pareto(TwoSidedPareto::new(1.3, 0.5, 0.5).unwrap());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
    let h = hill_estimate(&xs, 2_000).unwrap();
    assert!((h - 1.3).abs() < 0.1, "{h}");
}

#[test]
fn sample_stable_is_reproducible() {
    let s = SymmetricStableScale::new(0.8, 1.0).unwrap();
    assert_eq!(sample_stable(&s, 100, 3).unwrap(), sample_stable(&s, 100, 3).unwrap());
    assert!(sample_stable(&s, 0, 3).is_err());
}
