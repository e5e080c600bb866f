use num_complex::Complex;
use serde::{Deserialize, Serialize};

use super::config::{Built, ExperimentConfig};
use super::ensemble::{setup, TailSummary, STREAM_RULE, VERSION};
use crate::chains::{backward_recurrence_kernel, BackwardRecurrenceSpec, IidKernel, TableObservable};
use crate::conditional::{Ar1Conditional, Tabulated};
use crate::diagnostics::{
    ar1_hyper_integral, covariance_decay, hyper_norm_fk, hyper_norm_fk_direct, operator_norm_l20, poisson_solve,
    ui2_tail_curve, Ar1HyperIntegral, CovarianceDecay, SingularValueEstimate, Ui2Point,
};
use crate::error::{Error, Result};
use crate::poc::{replicate_stream, run_poc, simulate_states, PocRun, PocSettings};
use crate::tails::{solve_bn, SlowlyVarying, TailModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PocReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub tail: TailSummary,
    pub streams: String,
    pub run: PocRun<f64>,
}

/// PoC statistics for the chain of `cfg` on its n-grid and θ-grid.
pub fn run_poc_suite(cfg: &ExperimentConfig) -> Result<PocReport> {
    let s = setup(cfg)?;
    let settings = PocSettings {
        ns: cfg.n_grid.clone(),
        replicates: cfg.replicates,
        seed: cfg.seed,
        thetas: cfg.thetas.clone(),
        h: cfg.h,
    };
    let run = match &s.built {
        Built::Iid { marginal, psi } => {
            let k = IidKernel { marginal: marginal.clone() };
            run_poc(&k, |_, _| Ok(k.clone()), psi, &s.tail, &settings)?
        }
        Built::Ar1 { kernel, psi } => {
            let omegas_for = |b: f64| -> Vec<f64> { cfg.thetas.iter().map(|t| t / b).collect() };
            run_poc(
                kernel,
                |_, b| Tabulated::build(Ar1Conditional::new(*kernel), psi, &omegas_for(b), &[cfg.h * b], false),
                psi,
                &s.tail,
                &settings,
            )?
        }
        Built::Countable { spec, truncation, values } => {
            let k = backward_recurrence_kernel(spec, *truncation)?;
            let obs = TableObservable(values.clone());
            run_poc(&k, |_, _| Ok(k.clone()), &obs, &s.tail, &settings)?
        }
        Built::Skeleton { spec } => run_poc(spec, |_, _| Ok(*spec), &spec.observable(), &s.tail, &settings)?,
        Built::Arch { .. } => {
            return Err(Error::Config("PoC quantities are not available for the ARCH chain".into()));
        }
    };
    Ok(PocReport {
        version: VERSION.into(),
        config: cfg.clone(),
        tail: TailSummary::of(&s.tail),
        streams: STREAM_RULE.into(),
        run,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnoseSettings {
    pub gamma: f64,
    /// Truncations K compared for the gap estimate.
    pub truncations: Vec<usize>,
    pub ui2_gammas: Vec<f64>,
    pub ui2_k_max: usize,
    pub hyper_q: f64,
    pub hyper_k_max: usize,
    /// Largest k at which the closed form is checked against apply_P.
    pub hyper_direct_k_max: usize,
    pub ar1_rho: f64,
    pub ar1_q: Vec<f64>,
    pub covariance_paths: usize,
    pub covariance_len: usize,
    pub covariance_max_lag: usize,
    pub seed: u64,
}

impl Default for DiagnoseSettings {
    fn default() -> Self {
        DiagnoseSettings {
            gamma: 0.1,
            truncations: vec![30, 40],
            ui2_gammas: vec![0.05, 0.1, 0.15],
            ui2_k_max: 15,
            hyper_q: 3.0,
            hyper_k_max: 20,
            hyper_direct_k_max: 6,
            ar1_rho: 0.5,
            ar1_q: vec![2.5, 3.5],
            covariance_paths: 200,
            covariance_len: 4000,
            covariance_max_lag: 8,
            seed: 1,
        }
    }
}

impl DiagnoseSettings {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapEntry {
    pub truncation: usize,
    pub estimate: SingularValueEstimate<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub gamma: f64,
    pub entries: Vec<GapEntry>,
    /// Largest difference between the estimates over the truncations.
    pub truncation_spread: f64,
    pub expected_t: f64,
    /// 3 E T + P(T ≥ 1), the bound on a².
    pub bound: f64,
    pub hypotheses_hold: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ui2Curve {
    pub gamma: f64,
    pub truncation: usize,
    pub points: Vec<Ui2Point<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperRow {
    pub k: usize,
    /// log ‖P f_k‖_q^q in closed form.
    pub closed: f64,
    /// The same through apply_P, for small k.
    pub direct: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonSummary {
    pub truncation: usize,
    pub iterations: usize,
    pub residual: f64,
    pub gap: f64,
    pub delta_norm: f64,
    /// ‖χ‖₂ / (1 − gap).
    pub delta_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub version: String,
    pub settings: DiagnoseSettings,
    pub gap: GapReport,
    pub ui2: Vec<Ui2Curve>,
    pub hyper_gamma: f64,
    pub hyper_q: f64,
    pub hyper: Vec<HyperRow>,
    pub ar1_rho: f64,
    pub ar1: Vec<(f64, Ar1HyperIntegral<f64>)>,
    pub poisson: PoissonSummary,
    pub covariance: CovarianceDecay<f64>,
}

/// Operator diagnostics for the backward-recurrence and AR(1) examples.
pub fn run_diagnostics(s: &DiagnoseSettings) -> Result<DiagnosticsReport> {
    if s.truncations.is_empty() {
        return Err(Error::Config("need at least one truncation".into()));
    }
    let spec = BackwardRecurrenceSpec::new(s.gamma).map_err(to_config)?;
    let mut entries = Vec::with_capacity(s.truncations.len());
    for &k in &s.truncations {
        let kernel = backward_recurrence_kernel(&spec, k)?;
        entries.push(GapEntry { truncation: k, estimate: operator_norm_l20(&kernel)? });
    }
    let hi = entries.iter().map(|e| e.estimate.value).fold(f64::MIN, f64::max);
    let lo = entries.iter().map(|e| e.estimate.value).fold(f64::MAX, f64::min);
    let et = spec.expected_t();
    let gap = GapReport {
        gamma: s.gamma,
        truncation_spread: hi - lo,
        expected_t: et,
        bound: 3.0 * et + spec.tail(1),
        hypotheses_hold: spec.gap_hypotheses_hold(),
        entries,
    };

    let mut ui2 = Vec::with_capacity(s.ui2_gammas.len());
    for &g in &s.ui2_gammas {
        let sp = BackwardRecurrenceSpec::new(g).map_err(to_config)?;
        let k = sp.truncation_for(crate::chains::MAX_MASS_DEFICIT).max(s.ui2_k_max + 2);
        let kernel = backward_recurrence_kernel(&sp, k)?;
        ui2.push(Ui2Curve { gamma: g, truncation: k, points: ui2_tail_curve(&sp, &kernel, 0..=s.ui2_k_max)? });
    }

    let direct_k = s.hyper_direct_k_max.max(1) + 2;
    let direct_kernel =
        backward_recurrence_kernel(&spec, spec.truncation_for(crate::chains::MAX_MASS_DEFICIT).max(direct_k))?;
    let hyper = (1..=s.hyper_k_max)
        .map(|k| {
            Ok(HyperRow {
                k,
                closed: hyper_norm_fk(s.gamma, s.hyper_q, k)?,
                direct: if k <= s.hyper_direct_k_max {
                    Some(hyper_norm_fk_direct(&spec, &direct_kernel, s.hyper_q, k)?)
                } else {
                    None
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ar1 = s.ar1_q.iter().map(|&q| Ok((q, ar1_hyper_integral(s.ar1_rho, q)?))).collect::<Result<Vec<_>>>()?;

    let k = *s.truncations.iter().max().unwrap_or(&30);
    let kernel = backward_recurrence_kernel(&spec, k)?;
    let pi0 = kernel.pi()[0];
    let chi: Vec<Complex<f64>> =
        (0..kernel.size()).map(|j| Complex::new(if j == 0 { 1.0 - pi0 } else { -pi0 }, 0.0)).collect();
    let sol = poisson_solve(&kernel, &chi, 1e-13)?;
    let chi_norm = crate::diagnostics::l2_norm(&kernel, &chi);
    let poisson = PoissonSummary {
        truncation: k,
        iterations: sol.iterations,
        residual: sol.residual,
        gap: sol.gap,
        delta_norm: crate::diagnostics::l2_norm(&kernel, &sol.delta),
        delta_bound: chi_norm / (1.0 - sol.gap),
    };

    let paths: Vec<Vec<f64>> = (0..s.covariance_paths)
        .map(|r| {
            let states = simulate_states(&kernel, s.covariance_len - 1, s.seed, replicate_stream(0, r))?;
            Ok(states.iter().map(|&j| chi[j].re).collect())
        })
        .collect::<Result<_>>()?;
    let covariance = covariance_decay(&paths, (1.0 - pi0).max(pi0), s.covariance_max_lag)?;

    Ok(DiagnosticsReport {
        version: VERSION.into(),
        settings: s.clone(),
        gap,
        ui2,
        hyper_gamma: s.gamma,
        hyper_q: s.hyper_q,
        hyper,
        ar1_rho: s.ar1_rho,
        ar1,
        poisson,
        covariance,
    })
}

fn to_config(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnRow {
    pub n: u64,
    pub b_n: f64,
    /// n ℓ(B_n) / B_n^α − (c₊ + c₋).
    pub residual: f64,
}

/// B_n over an n-grid for a tail model with constant ℓ.
pub fn bn_table(alpha: f64, ell: f64, c_plus: f64, c_minus: f64, ns: &[u64]) -> Result<Vec<BnRow>> {
    let tm = TailModel::new(alpha, SlowlyVarying::Constant(ell), c_plus, c_minus).map_err(to_config)?;
    ns.iter()
        .map(|&n| {
            let b = solve_bn(n, &tm)?;
            Ok(BnRow { n, b_n: b, residual: n as f64 * ell / b.powf(alpha) - (c_plus + c_minus) })
        })
        .collect()
}
