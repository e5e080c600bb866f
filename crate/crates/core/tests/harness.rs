use markov_stable::harness::{
    bn_table, cf_distance, empirical_cf, run_arch_contrast, run_ensemble, run_poc_suite, run_skeleton_contrast,
    run_weak_lln, setup, ExperimentConfig, Report,
};
use markov_stable::Error;
use num_complex::Complex;
use proptest::prelude::*;

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn config_error(r: Result<impl std::fmt::Debug, Error>) -> bool {
    matches!(r, Err(Error::Config(_)))
}

const IID: &str = r#"
seed = 3
replicates = 64
n_grid = [50, 200]
thetas = [-1.0, 0.5, 1.0]

[chain]
kind = "iid"
marginal = { kind = "standard_normal" }

[observable]
kind = "quantile"
law = { law = "pareto", alpha = 1.5, c_plus = 0.5, c_minus = 0.5 }
"#;

#[test]
fn unknown_keys_rejected() {
    assert!(config_error(ExperimentConfig::from_toml(&format!("colour = 1\n{IID}"))));
    let bad_chain = IID.replace("kind = \"iid\"", "kind = \"iid\"\nrho = 0.5");
    assert!(config_error(ExperimentConfig::from_toml(&bad_chain)));
    let bad_law = IID.replace("c_minus = 0.5 }", "c_minus = 0.5, scale = 2.0 }");
    assert!(config_error(ExperimentConfig::from_toml(&bad_law)));
    let bad_kind = IID.replace("kind = \"iid\"", "kind = \"garch\"");
    assert!(config_error(ExperimentConfig::from_toml(&bad_kind)));
}

#[test]
fn grids_validated() {
    assert!(config_error(ExperimentConfig::from_toml(&IID.replace("[50, 200]", "[200, 50]"))));
    assert!(config_error(ExperimentConfig::from_toml(&IID.replace("[50, 200]", "[0, 50]"))));
    assert!(config_error(ExperimentConfig::from_toml(&IID.replace("replicates = 64", "replicates = 0"))));
    assert!(config_error(ExperimentConfig::from_toml(&IID.replace("thetas = [-1.0, 0.5, 1.0]", "thetas = []"))));
}

#[test]
fn config_round_trips() {
    let c = cfg(IID);
    assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
}

#[test]
fn centering_must_match_alpha_case() {
    // α ∈ (1, 2) without centering is fine only when π(Ψ) = 0 is known.
    assert!(setup(&cfg(IID)).is_ok());
    let shifted = IID.replace(
        "law = { law = \"pareto\", alpha = 1.5, c_plus = 0.5, c_minus = 0.5 }",
        "law = { law = \"pareto\", alpha = 1.5, c_plus = 0.9, c_minus = 0.1 }",
    );
    assert!(config_error(setup(&cfg(&shifted))));
    assert!(setup(&cfg(&format!("centering = \"mean\"\n{shifted}"))).is_ok());

    let below_one = IID.replace("alpha = 1.5", "alpha = 0.8");
    assert!(config_error(setup(&cfg(&format!("centering = \"conditional\"\n{below_one}")))));
    assert!(config_error(setup(&cfg(&format!("alpha_case = \"one_to_two\"\n{below_one}")))));

    let unknown_mean = r#"
seed = 1
replicates = 8
n_grid = [10]
[chain]
kind = "iid"
marginal = { kind = "uniform", lo = 0.0, hi = 2.0 }
[observable]
kind = "clipped_identity"
bound = 1.0
[tail]
alpha = 1.5
ell = 1.0
c_plus = 0.5
c_minus = 0.5
"#;
    assert!(config_error(setup(&cfg(unknown_mean))));
}

#[test]
fn arch_boundary_rejected() {
    let arch = |lambda: f64| {
        format!(
            "seed = 1\nreplicates = 8\nn_grid = [10]\n[chain]\nkind = \"arch\"\nbeta = 1.0\nlambda = {lambda}\ntail_constant = 1.0\ntau_draws = 10000\n"
        )
    };
    assert!(config_error(run_arch_contrast(&cfg(&arch(1.0)))));
    assert!(config_error(run_arch_contrast(&cfg(&arch(0.5)))));
    assert!(config_error(run_poc_suite(&cfg(&arch(1.2)))));
    let r = run_arch_contrast(&cfg(&arch(1.2))).unwrap();
    assert!(r.kappa_residual < 1e-10);
    assert!(r.tau_interval.0 < r.tau.estimate && r.tau.estimate < r.tau_interval.1);
}

#[test]
fn smallest_run_is_well_formed() {
    let c = cfg(&IID.replace("replicates = 64", "replicates = 1").replace("[50, 200]", "[1]"));
    let r = run_ensemble(&c).unwrap();
    assert_eq!(r.levels.len(), 1);
    let l = &r.levels[0];
    assert!(l.distance >= 0.0 && l.distance <= 2.0);
    assert!(l.empirical_cf.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    let json: serde_json::Value = serde_json::from_str(&r.json().unwrap()).unwrap();
    assert_eq!(json["config"]["replicates"], 1);
    let t = r.tables().unwrap();
    assert_eq!(t[0].text.lines().count(), 1 + c.thetas.len());
}

#[test]
fn reports_identical_across_thread_counts() {
    let c = cfg(IID);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_ensemble(&c).unwrap().json().unwrap())
    };
    assert_eq!(run(1), run(3));
    let other = cfg(&IID.replace("seed = 3", "seed = 4"));
    assert_ne!(run_ensemble(&other).unwrap().json().unwrap(), run(1));
}

const WEAK: &str = r#"
seed = 5
replicates = 400
n_grid = [100, 1000, 10000]

[chain]
kind = "ar1"
rho = 0.5

[weak_lln]
beta = 2.0
alpha = 1.0
"#;

#[test]
fn weak_law_of_zero_is_zero() {
    let r = run_weak_lln(&cfg(&format!("{WEAK}\n[observable]\nkind = \"zero\"\n"))).unwrap();
    assert!(r.levels.iter().all(|l| l.percentile == 0.0 && l.band_hi == 0.0));
}

#[test]
fn bounded_observable_has_half_slope() {
    let r = run_weak_lln(&cfg(&format!("{WEAK}\n[observable]\nkind = \"clipped_identity\"\nbound = 1.0\n"))).unwrap();
    assert!((r.slope + 0.5).abs() < 0.15, "slope {}", r.slope);
    assert!(r.decreasing);
}

#[test]
fn weak_law_rejects_infinite_moment() {
    let c = format!(
        "{}\n[observable]\nkind = \"quantile\"\nlaw = {{ law = \"pareto\", alpha = 1.2, c_plus = 0.5, c_minus = 0.5 }}\n",
        WEAK.replace("beta = 2.0", "beta = 1.5").replace("alpha = 1.0", "alpha = 1.1")
    );
    assert!(config_error(run_weak_lln(&cfg(&c))));
}

#[test]
fn skeleton_identity_holds_on_every_path() {
    let c = r#"
seed = 9
replicates = 50
n_grid = [300]
[chain]
kind = "skeleton"
psi = { law = "cauchy", scale = 1.0 }
[skeleton]
full_n_grid = [100, 1000]
"#;
    let r = run_skeleton_contrast(&cfg(c)).unwrap();
    assert_eq!(r.identity_violations, 0);
    assert_eq!(r.full.len(), 2);
    assert!(r.p95_spread >= 1.0);
}

#[test]
fn bn_table_residuals_vanish() {
    let rows = bn_table(0.8, 1.0, 0.5, 0.5, &[1, 10, 1000, 1_000_000]).unwrap();
    assert!(rows.windows(2).all(|w| w[1].b_n > w[0].b_n));
    assert!(rows.iter().all(|r| r.residual.abs() < 1e-10));
    assert!(config_error(bn_table(2.5, 1.0, 0.5, 0.5, &[10])));
}

fn unit_cf() -> impl Strategy<Value = Vec<Complex<f64>>> {
    prop::collection::vec((0.0..1.0f64, -3.2..3.2f64).prop_map(|(r, a)| Complex::from_polar(r, a)), 1..12)
}

proptest! {
    #[test]
    fn cf_distance_is_a_metric_on_the_grid(a in unit_cf(), shift in -0.5..0.5f64) {
        let b: Vec<Complex<f64>> = a.iter().map(|z| z * Complex::from_polar(1.0, shift)).collect();
        let d = cf_distance(&a, &b).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert_eq!(d, cf_distance(&b, &a).unwrap());
        prop_assert_eq!(cf_distance(&a, &a).unwrap(), 0.0);
        if a.iter().any(|z| z.norm() > 1e-9) && shift.abs() > 1e-6 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn empirical_cf_has_modulus_at_most_one(xs in prop::collection::vec(-1e6..1e6f64, 1..200), th in -10.0..10.0f64) {
        let z = empirical_cf(&xs, &[th, -th]);
        prop_assert!(z[0].norm() <= 1.0 + 1e-15);
        prop_assert!((z[0].conj() - z[1]).norm() < 1e-12);
    }
}

#[test]
fn cf_distance_rejects_empty_or_mismatched() {
    assert!(cf_distance(&[], &[]).is_err());
    assert!(cf_distance(&[Complex::new(1.0, 0.0)], &[]).is_err());
}
