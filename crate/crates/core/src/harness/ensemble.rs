use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{arch_tail, Built, Centering, ChainConfig, ExperimentConfig, Setup};
use crate::chains::{
    arch_kappa, arch_log_moment, arch_tail_constant_empirical, arch_tail_constant_goldie, arch_tau,
    backward_recurrence_kernel, stream_rng, IidKernel, MarkovKernel, Observe, SkeletonState, TableObservable,
    TauEstimate,
};
use crate::conditional::{Ar1Conditional, ConditionalLaw, Tabulated};
use crate::error::{Error, Result};
use crate::poc::{ls_slope, replicate_stream};
use crate::stable::{strictly_stable_cf, SymmetricStableScale};
use crate::tails::{SlowlyVarying, TailModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Probabilities of the reported sample quantiles.
pub const QUANTILE_PROBS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

/// Seed used by the ARCH tail-constant and τ estimators, derived from the
/// master seed so that they never share a stream with the replicates.
fn aux_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleQuantile {
    pub p: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub n: usize,
    pub b_n: f64,
    pub empirical_cf: Vec<Complex<f64>>,
    pub target_cf: Vec<Complex<f64>>,
    pub distance: f64,
    pub quantiles: Vec<SampleQuantile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailSummary {
    pub alpha: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    /// ℓ when it is constant.
    pub ell: Option<f64>,
}

impl TailSummary {
    pub fn of(t: &TailModel<f64>) -> Self {
        let ell = match t.ell {
            SlowlyVarying::Constant(c) => Some(c),
            SlowlyVarying::Function(_) => None,
        };
        TailSummary { alpha: t.alpha, c_plus: t.c_plus, c_minus: t.c_minus, ell }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub tail: TailSummary,
    pub alpha_case: super::config::AlphaCase,
    pub seed: u64,
    /// How replicate streams derive from the master seed.
    pub streams: String,
    pub thetas: Vec<f64>,
    pub levels: Vec<LevelReport>,
}

pub const STREAM_RULE: &str = "ChaCha8(seed) with stream (n_index << 32) | replicate";

/// sup over the grid of |a − b|.
pub fn cf_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> Result<f64> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::InvalidParameter(format!(
            "CF distance needs two non-empty grids of equal length, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max))
}

/// (1/N) Σ e^{iθ s}.
pub fn empirical_cf(samples: &[f64], thetas: &[f64]) -> Vec<Complex<f64>> {
    let inv = 1.0 / samples.len() as f64;
    thetas
        .iter()
        .map(|&t| {
            let (mut c, mut s) = (0.0, 0.0);
            for &x in samples {
                let (sn, cs) = (t * x).sin_cos();
                c += cs;
                s += sn;
            }
            Complex::new(c * inv, s * inv)
        })
        .collect()
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let i = h.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (h - i as f64) * (sorted[j] - sorted[i])
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn quantiles(v: &[f64]) -> Vec<SampleQuantile> {
    let s = sorted(v);
    QUANTILE_PROBS.iter().map(|&p| SampleQuantile { p, value: quantile_sorted(&s, p) }).collect()
}

/// Which states enter a path sum: X_{stride·k} for k = first, …, first + n − 1,
/// with `first` either 0 or 1.
#[derive(Debug, Clone, Copy)]
pub struct SumPlan {
    pub n: usize,
    pub stride: usize,
    pub first: usize,
}

impl SumPlan {
    /// Ψ(X_1) + … + Ψ(X_n).
    pub fn plain(n: usize) -> Self {
        SumPlan { n, stride: 1, first: 1 }
    }
}

/// Unnormalized path sums Σ_k [Ψ(X_{stride·k}) − c(X_{stride·k − 1})], one
/// per replicate, each on its own stream; the output order is the replicate
/// order whatever the thread count.
pub fn replicate_sums<K, P, C>(
    kernel: &K,
    psi: P,
    center: C,
    plan: SumPlan,
    replicates: usize,
    seed: u64,
    n_index: usize,
) -> Result<Vec<f64>>
where
    K: MarkovKernel<f64>,
    P: Fn(&K::State) -> f64 + Sync,
    C: Fn(&K::State) -> Result<f64> + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, replicate_stream(n_index, r));
            let mut x = kernel.initial(&mut rng)?;
            let mut s = 0.0;
            let mut count = plan.n;
            if plan.first == 0 && count > 0 {
                s += psi(&x);
                count -= 1;
            }
            for _ in 0..count {
                for _ in 1..plan.stride {
                    x = kernel.step(x, &mut rng);
                }
                let c = center(&x)?;
                x = kernel.step(x, &mut rng);
                s += psi(&x) - c;
            }
            if !s.is_finite() {
                return Err(Error::Numeric(format!("non-finite path sum in replicate {r}")));
            }
            Ok(s)
        })
        .collect()
}

fn none_center<S>(_: &S) -> Result<f64> {
    Ok(0.0)
}

/// Path sums for the chain of `setup` under its centering.
fn setup_sums(
    setup: &Setup,
    plan: SumPlan,
    replicates: usize,
    seed: u64,
    n_index: usize,
    ar1_means: Option<&MeanTable>,
) -> Result<Vec<f64>> {
    let mean = setup.stationary_mean.unwrap_or(0.0);
    let centering = setup.centering;
    macro_rules! go {
        ($kernel:expr, $psi:expr, $cond:expr) => {{
            let k = $kernel;
            match centering {
                Centering::None => replicate_sums(k, $psi, none_center, plan, replicates, seed, n_index),
                Centering::Mean => replicate_sums(k, $psi, |_| Ok(mean), plan, replicates, seed, n_index),
                Centering::Conditional => replicate_sums(k, $psi, $cond, plan, replicates, seed, n_index),
            }
        }};
    }
    match &setup.built {
        Built::Iid { marginal, psi } => {
            let k = IidKernel { marginal: marginal.clone() };
            let m = if centering == Centering::Conditional { k.mean(&0.0, psi)? } else { 0.0 };
            go!(&k, |x: &f64| psi.eval(*x), |_: &f64| Ok(m))
        }
        Built::Ar1 { kernel, psi } => {
            let table = ar1_means;
            go!(kernel, |x: &f64| psi.eval(*x), |x: &f64| match table {
                Some(t) => t.mean(x, psi),
                None => Err(Error::Config("conditional means were not tabulated".into())),
            })
        }
        Built::Countable { spec, truncation, values } => {
            let k = backward_recurrence_kernel(spec, *truncation)?;
            let obs = TableObservable(values.clone());
            go!(&k, |x: &usize| values[*x], |x: &usize| k.mean(x, &obs))
        }
        Built::Skeleton { spec } => {
            let obs = spec.observable();
            go!(spec, |x: &SkeletonState<f64>| obs.psi(x), |x: &SkeletonState<f64>| spec.mean(x, &obs))
        }
        Built::Arch { spec } => {
            go!(spec, |x: &f64| *x, |_: &f64| Err(Error::Config("no conditional centering for ARCH".into())))
        }
    }
}

/// Tabulated conditional means of the AR(1) chain.
pub type MeanTable = Tabulated<f64, Ar1Conditional<f64>>;

fn ar1_mean_table(setup: &Setup) -> Result<Option<MeanTable>> {
    match (&setup.built, setup.centering) {
        (Built::Ar1 { kernel, psi }, Centering::Conditional) => {
            Ok(Some(Tabulated::build(Ar1Conditional::new(*kernel), psi, &[], &[], true)?))
        }
        _ => Ok(None),
    }
}

fn estimate_arch_constant(cfg: &ExperimentConfig) -> impl FnOnce(&crate::chains::ArchSpec<f64>) -> Result<f64> + '_ {
    move |spec| {
        let path = match &cfg.chain {
            ChainConfig::Arch { tail_path, .. } => *tail_path,
            _ => 1_000_000,
        };
        arch_tail_constant_empirical(spec, path, aux_seed(cfg.seed))
    }
}

/// Validates `cfg` (estimating the ARCH tail constant when needed).
pub fn setup(cfg: &ExperimentConfig) -> Result<Setup> {
    Setup::from_config(cfg, estimate_arch_constant(cfg))
}

fn level_report(n: usize, b: f64, sums: &[f64], thetas: &[f64], target: &[Complex<f64>]) -> Result<LevelReport> {
    let norm: Vec<f64> = sums.iter().map(|s| s / b).collect();
    let emp = empirical_cf(&norm, thetas);
    Ok(LevelReport {
        n,
        b_n: b,
        distance: cf_distance(&emp, target)?,
        empirical_cf: emp,
        target_cf: target.to_vec(),
        quantiles: quantiles(&norm),
    })
}

fn stable_target(tail: &TailModel<f64>, thetas: &[f64]) -> Result<Vec<Complex<f64>>> {
    thetas.iter().map(|&t| strictly_stable_cf(t, tail.alpha, tail.c_plus, tail.c_minus)).collect()
}

/// Normalized partial sums against the strictly stable limit, per n.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let setup = setup(cfg)?;
    let target = stable_target(&setup.tail, &cfg.thetas)?;
    let means = ar1_mean_table(&setup)?;
    let mut levels = Vec::with_capacity(cfg.n_grid.len());
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let b = setup.tail.solve_bn(n as u64)?;
        let sums = setup_sums(&setup, SumPlan::plain(n), cfg.replicates, cfg.seed, ni, means.as_ref())?;
        levels.push(level_report(n, b, &sums, &cfg.thetas, &target)?);
    }
    Ok(ConvergenceReport {
        version: VERSION.into(),
        config: cfg.clone(),
        tail: TailSummary::of(&setup.tail),
        alpha_case: setup.case,
        seed: cfg.seed,
        streams: STREAM_RULE.into(),
        thetas: cfg.thetas.clone(),
        levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakLevel {
    pub n: usize,
    pub b_n: f64,
    pub percentile: f64,
    /// 95% order-statistic band for the percentile.
    pub band_lo: f64,
    pub band_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakLlnReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub beta: f64,
    pub alpha: f64,
    pub percentile: f64,
    pub seed: u64,
    pub streams: String,
    pub levels: Vec<WeakLevel>,
    /// Log-log slope of the percentile against n.
    pub slope: f64,
    /// Strictly decreasing beyond the bands: each band lies below the previous one.
    pub decreasing: bool,
}

/// Order-statistic band for the p-quantile of N samples: ranks
/// Np ± 1.96 √(Np(1−p)).
fn quantile_band(sorted: &[f64], p: f64) -> (f64, f64) {
    let n = sorted.len() as f64;
    let w = 1.96 * (n * p * (1.0 - p)).sqrt();
    let lo = ((n * p - w).floor().max(0.0) as usize).min(sorted.len() - 1);
    let hi = ((n * p + w).ceil() as usize).min(sorted.len() - 1);
    (sorted[lo], sorted[hi])
}

/// (Ψ(X_0) + … + Ψ(X_{n−1}))/B_n with B_n = n^{1/α}: percentile decay.
pub fn run_weak_lln(cfg: &ExperimentConfig) -> Result<WeakLlnReport> {
    cfg.check_grids()?;
    let w = cfg.weak_lln.ok_or_else(|| Error::Config("missing [weak_lln] section".into()))?;
    if !(w.beta > 1.0) {
        return Err(Error::Config(format!("beta must exceed 1, got {}", w.beta)));
    }
    if !(w.alpha > 0.0 && w.alpha < w.beta.min(2.0)) {
        return Err(Error::Config(format!("alpha must lie in (0, min(beta, 2)), got {}", w.alpha)));
    }
    if !(w.percentile > 0.0 && w.percentile < 1.0) {
        return Err(Error::Config("percentile must lie in (0, 1)".into()));
    }
    if cfg.centering != Centering::None {
        return Err(Error::Config("the weak law runs on uncentered sums of a mean-zero observable".into()));
    }
    let (built, tail, mean) = super::config::build_chain(cfg, estimate_arch_constant(cfg))?;
    match mean {
        Some(m) if m.abs() <= 1e-12 => {}
        _ => return Err(Error::Config("the weak law needs pi(Psi) = 0 by construction".into())),
    }
    if let Some(t) = tail {
        if !(w.beta < t.alpha) && t.alpha < 2.0 {
            return Err(Error::Config(format!(
                "declared beta = {} but Psi has tail index {}, so its beta-moment is infinite",
                w.beta, t.alpha
            )));
        }
    }
    let setup = Setup {
        built,
        tail: TailModel::pareto(1.0, 0.5, 0.5)?,
        case: super::config::AlphaCase::OneSymmetric,
        centering: Centering::None,
        stationary_mean: Some(0.0),
    };
    let mut levels = Vec::with_capacity(cfg.n_grid.len());
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let b = (n as f64).powf(1.0 / w.alpha);
        let plan = SumPlan { n, stride: 1, first: 0 };
        let sums = setup_sums(&setup, plan, cfg.replicates, cfg.seed, ni, None)?;
        let abs: Vec<f64> = sorted(&sums.iter().map(|s| (s / b).abs()).collect::<Vec<_>>());
        let (lo, hi) = quantile_band(&abs, w.percentile);
        levels.push(WeakLevel { n, b_n: b, percentile: quantile_sorted(&abs, w.percentile), band_lo: lo, band_hi: hi });
    }
    let pts: Vec<(f64, f64)> =
        levels.iter().filter(|l| l.percentile > 0.0).map(|l| ((l.n as f64).ln(), l.percentile.ln())).collect();
    let decreasing = levels.windows(2).all(|p| p[1].band_hi < p[0].band_lo);
    Ok(WeakLlnReport {
        version: VERSION.into(),
        config: cfg.clone(),
        beta: w.beta,
        alpha: w.alpha,
        percentile: w.percentile,
        seed: cfg.seed,
        streams: STREAM_RULE.into(),
        levels,
        slope: ls_slope(&pts),
        decreasing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullLevel {
    pub n: usize,
    pub b_n: f64,
    pub median_abs: f64,
    pub p95_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonContrastReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub tail: TailSummary,
    pub seed: u64,
    pub streams: String,
    pub thetas: Vec<f64>,
    /// Σ_{k≤m} Ψ(X_{3k}) / B_m against the stable limit; n is m.
    pub skeleton: Vec<LevelReport>,
    /// Unnormalized |S_n| for the whole sequence.
    pub full: Vec<FullLevel>,
    /// max/min of the 95th percentile of |S_n| across the full grid.
    pub p95_spread: f64,
    /// Paths on which Ψ(X_j) + Ψ(X_{j+1}) ≠ 0 for some j with X_j ∈ [0, 1).
    pub identity_violations: usize,
}

/// 3-skeleton sums against the stable limit, and stochastic boundedness of
/// the whole-sequence sums.
pub fn run_skeleton_contrast(cfg: &ExperimentConfig) -> Result<SkeletonContrastReport> {
    let setup = setup(cfg)?;
    let Built::Skeleton { spec } = &setup.built else {
        return Err(Error::Config("skeleton contrast needs chain kind = \"skeleton\"".into()));
    };
    if setup.centering != Centering::None {
        return Err(Error::Config("skeleton sums are uncentered".into()));
    }
    let full_grid = cfg.skeleton.clone().unwrap_or_default().full_n_grid;
    let target = stable_target(&setup.tail, &cfg.thetas)?;
    let mut skeleton = Vec::with_capacity(cfg.n_grid.len());
    for (ni, &m) in cfg.n_grid.iter().enumerate() {
        let b = setup.tail.solve_bn(m as u64)?;
        let sums = setup_sums(&setup, SumPlan { n: m, stride: 3, first: 1 }, cfg.replicates, cfg.seed, ni, None)?;
        skeleton.push(level_report(m, b, &sums, &cfg.thetas, &target)?);
    }
    let obs = spec.observable();
    let offset = cfg.n_grid.len();
    let mut full = Vec::with_capacity(full_grid.len());
    let mut violations = 0usize;
    for (k, &n) in full_grid.iter().enumerate() {
        let ni = offset + k;
        let res: Vec<(f64, bool)> = (0..cfg.replicates)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream_rng(cfg.seed, replicate_stream(ni, r));
                let mut x = spec.initial(&mut rng)?;
                let mut s = 0.0;
                let mut ok = true;
                for _ in 0..n {
                    let y = spec.step(x, &mut rng);
                    let py = obs.psi(&y);
                    if x.segment == 0 && py + obs.psi(&x) != 0.0 {
                        ok = false;
                    }
                    s += py;
                    x = y;
                }
                Ok((s.abs(), ok))
            })
            .collect::<Result<_>>()?;
        violations += res.iter().filter(|r| !r.1).count();
        let abs = sorted(&res.iter().map(|r| r.0).collect::<Vec<_>>());
        full.push(FullLevel {
            n,
            b_n: setup.tail.solve_bn(n as u64)?,
            median_abs: quantile_sorted(&abs, 0.5),
            p95_abs: quantile_sorted(&abs, 0.95),
        });
    }
    let hi = full.iter().map(|l| l.p95_abs).fold(f64::MIN, f64::max);
    let lo = full.iter().map(|l| l.p95_abs).fold(f64::MAX, f64::min);
    Ok(SkeletonContrastReport {
        version: VERSION.into(),
        config: cfg.clone(),
        tail: TailSummary::of(&setup.tail),
        seed: cfg.seed,
        streams: STREAM_RULE.into(),
        thetas: cfg.thetas.clone(),
        skeleton,
        full,
        p95_spread: hi / lo,
        identity_violations: violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchLevel {
    pub n: usize,
    pub b_n: f64,
    pub empirical_cf: Vec<Complex<f64>>,
    pub unit_cf: Vec<Complex<f64>>,
    pub tau_cf: Vec<Complex<f64>>,
    /// Distance to μ_{2κ,1}.
    pub distance_unit: f64,
    /// Distance to μ_{2κ,τ̂}.
    pub distance_tau: f64,
    pub quantiles: Vec<SampleQuantile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchContrastReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub kappa: f64,
    /// |ln E(λZ²)^κ| at the solved κ.
    pub kappa_residual: f64,
    pub tail_index: f64,
    pub tail_constant: f64,
    /// "config" or "empirical".
    pub tail_constant_source: String,
    /// Ratio-formula tail constant and its standard error, for comparison.
    pub tail_constant_ratio: (f64, f64),
    pub tau: TauEstimate<f64>,
    /// τ̂ ± 3 stderr.
    pub tau_interval: (f64, f64),
    /// |τ̂ − 1| > 3 stderr.
    pub separated: bool,
    pub seed: u64,
    pub streams: String,
    pub thetas: Vec<f64>,
    pub levels: Vec<ArchLevel>,
}

/// ARCH(1) sums normalized by (nC/2)^{1/(2κ)} against μ_{2κ,1} and μ_{2κ,τ̂}.
pub fn run_arch_contrast(cfg: &ExperimentConfig) -> Result<ArchContrastReport> {
    let ChainConfig::Arch { tail_constant, tau_draws, tail_path, .. } = &cfg.chain else {
        return Err(Error::Config("ARCH contrast needs chain kind = \"arch\"".into()));
    };
    let setup = setup(cfg)?;
    let Built::Arch { spec } = &setup.built else { unreachable!("checked above") };
    if setup.centering != Centering::None {
        return Err(Error::Config("ARCH sums are uncentered (the law is symmetric)".into()));
    }
    let kappa = arch_kappa(spec.lambda)?;
    let residual = arch_log_moment(spec.lambda, kappa).abs();
    let c = match tail_constant {
        Some(c) => *c,
        None => arch_tail_constant_empirical(spec, *tail_path, aux_seed(cfg.seed))?,
    };
    let tail = arch_tail(spec, c)?;
    let ratio = arch_tail_constant_goldie(spec, 100_000, aux_seed(cfg.seed))?;
    let tau = arch_tau(spec, *tau_draws, aux_seed(cfg.seed))?;
    let alpha = spec.tail_index();
    let unit = SymmetricStableScale::new(alpha, 1.0)?;
    let scaled = SymmetricStableScale::new(alpha, tau.estimate.max(f64::MIN_POSITIVE))?;
    let unit_cf: Vec<Complex<f64>> = cfg.thetas.iter().map(|&t| unit.cf(t)).collect::<Result<_>>()?;
    let tau_cf: Vec<Complex<f64>> = cfg.thetas.iter().map(|&t| scaled.cf(t)).collect::<Result<_>>()?;
    let mut levels = Vec::with_capacity(cfg.n_grid.len());
    for (ni, &n) in cfg.n_grid.iter().enumerate() {
        let b = tail.solve_bn(n as u64)?;
        let sums = setup_sums(&setup, SumPlan::plain(n), cfg.replicates, cfg.seed, ni, None)?;
        let norm: Vec<f64> = sums.iter().map(|s| s / b).collect();
        let emp = empirical_cf(&norm, &cfg.thetas);
        levels.push(ArchLevel {
            n,
            b_n: b,
            distance_unit: cf_distance(&emp, &unit_cf)?,
            distance_tau: cf_distance(&emp, &tau_cf)?,
            empirical_cf: emp,
            unit_cf: unit_cf.clone(),
            tau_cf: tau_cf.clone(),
            quantiles: quantiles(&norm),
        });
    }
    Ok(ArchContrastReport {
        version: VERSION.into(),
        config: cfg.clone(),
        kappa,
        kappa_residual: residual,
        tail_index: alpha,
        tail_constant: c,
        tail_constant_source: if tail_constant.is_some() { "config" } else { "empirical" }.into(),
        tail_constant_ratio: ratio,
        tau_interval: (tau.estimate - 3.0 * tau.stderr, tau.estimate + 3.0 * tau.stderr),
        separated: (tau.estimate - 1.0).abs() > 3.0 * tau.stderr,
        tau,
        seed: cfg.seed,
        streams: STREAM_RULE.into(),
        thetas: cfg.thetas.clone(),
        levels,
    })
}
