use serde::{Deserialize, Serialize};

use crate::chains::{Ar1Kernel, Ar1Spec, ArchSpec, BackwardRecurrenceSpec, SkeletonSpec, MAX_MASS_DEFICIT};
use crate::error::{Error, Result};
use crate::tails::{ImageLaw, Marginal, Observable, SlowlyVarying, TailModel};

/// Default θ-grid.
pub const DEFAULT_THETAS: [f64; 10] = [-4.0, -2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0, 4.0];

fn default_thetas() -> Vec<f64> {
    DEFAULT_THETAS.to_vec()
}

fn one() -> f64 {
    1.0
}

fn default_full_grid() -> Vec<usize> {
    vec![1_000, 10_000, 100_000]
}

fn default_tau_draws() -> usize {
    100_000
}

fn default_tail_path() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChainConfig {
    Iid {
        marginal: Marginal<f64>,
    },
    Ar1 {
        rho: f64,
    },
    BackwardRecurrence {
        gamma: f64,
        /// Largest state K; chosen from the mass-deficit bound when absent.
        truncation: Option<usize>,
    },
    Skeleton {
        psi: ImageLaw<f64>,
    },
    Arch {
        beta: f64,
        lambda: f64,
        /// Tail constant C of P(|X| > x) ~ C x^{−2κ}; estimated when absent.
        tail_constant: Option<f64>,
        #[serde(default = "default_tail_path")]
        tail_path: usize,
        #[serde(default = "default_tau_draws")]
        tau_draws: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// Quantile transform of the chain's stationary marginal onto `law`.
    Quantile {
        law: ImageLaw<f64>,
    },
    ClippedCubic {
        bound: f64,
    },
    ClippedIdentity {
        bound: f64,
    },
    Identity,
    Zero,
    /// Values Ψ(0), …, Ψ(K) on a countable state space.
    Table {
        values: Vec<f64>,
    },
}

/// Explicit tail model with constant slowly varying part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub alpha: f64,
    pub ell: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    #[default]
    None,
    /// Subtract E(Ψ(X_j) | X_{j−1}).
    Conditional,
    /// Subtract π(Ψ).
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaCase {
    BelowOne,
    OneSymmetric,
    OneToTwo,
}

impl AlphaCase {
    pub fn classify(tail: &TailModel<f64>) -> Result<Self> {
        let a = tail.alpha;
        if a < 1.0 {
            Ok(AlphaCase::BelowOne)
        } else if a == 1.0 {
            if tail.c_plus != tail.c_minus {
                return Err(Error::Config("alpha = 1 needs a symmetric limit (c+ = c-)".into()));
            }
            Ok(AlphaCase::OneSymmetric)
        } else {
            Ok(AlphaCase::OneToTwo)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakLlnConfig {
    /// Declared moment order: ∫|Ψ|^β dπ < ∞.
    pub beta: f64,
    /// Normalization index: B_n = n^{1/α}.
    pub alpha: f64,
    #[serde(default = "percentile")]
    pub percentile: f64,
}

fn percentile() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkeletonConfig {
    /// n-grid of the unnormalized full-sequence sums.
    #[serde(default = "default_full_grid")]
    pub full_n_grid: Vec<usize>,
}

impl Default for SkeletonConfig {
    fn default() -> Self {
        SkeletonConfig { full_n_grid: default_full_grid() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chain: ChainConfig,
    pub observable: Option<ObservableConfig>,
    pub tail: Option<TailConfig>,
    #[serde(default)]
    pub centering: Centering,
    pub alpha_case: Option<AlphaCase>,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_thetas")]
    pub thetas: Vec<f64>,
    #[serde(default = "one")]
    pub h: f64,
    pub weak_lln: Option<WeakLlnConfig>,
    pub skeleton: Option<SkeletonConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check_grids()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn check_grids(&self) -> Result<()> {
        check_grid("n_grid", &self.n_grid)?;
        if let Some(s) = &self.skeleton {
            check_grid("skeleton.full_n_grid", &s.full_n_grid)?;
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.thetas.is_empty() || self.thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::Config("theta grid must be non-empty and finite".into()));
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::Config(format!("h must be positive and finite, got {}", self.h)));
        }
        Ok(())
    }
}

fn check_grid(name: &str, g: &[usize]) -> Result<()> {
    if g.is_empty() || g[0] == 0 || g.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!(
            "{name} must be a non-empty, strictly increasing list of positive integers"
        )));
    }
    Ok(())
}

/// A validated chain with its observable.
#[derive(Debug, Clone)]
pub enum Built {
    Iid { marginal: Marginal<f64>, psi: Observable<f64> },
    Ar1 { kernel: Ar1Kernel<f64>, psi: Observable<f64> },
    Countable { spec: BackwardRecurrenceSpec<f64>, truncation: usize, values: Vec<f64> },
    Skeleton { spec: SkeletonSpec<f64> },
    Arch { spec: ArchSpec<f64> },
}

/// Validated experiment: chain, observable, tail model, α-case and centering.
#[derive(Debug, Clone)]
pub struct Setup {
    pub built: Built,
    pub tail: TailModel<f64>,
    pub case: AlphaCase,
    pub centering: Centering,
    /// π(Ψ) when known in closed form.
    pub stationary_mean: Option<f64>,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) | Error::Unsupported(m) | Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

fn real_observable(base: &Marginal<f64>, o: &ObservableConfig) -> Result<Observable<f64>> {
    Ok(match o {
        ObservableConfig::Quantile { law } => {
            law.validate().map_err(config_err)?;
            if !base.is_continuous() {
                return Err(Error::Config(
                    "quantile observables need a continuous marginal; an atomic marginal gives a step tail".into(),
                ));
            }
            Observable::Quantile { base: base.clone(), law: *law }
        }
        ObservableConfig::ClippedCubic { bound } => Observable::ClippedCubic { bound: positive("bound", *bound)? },
        ObservableConfig::ClippedIdentity { bound } => {
            Observable::ClippedIdentity { bound: positive("bound", *bound)? }
        }
        ObservableConfig::Identity => Observable::Identity,
        ObservableConfig::Zero => Observable::Zero,
        ObservableConfig::Table { .. } => {
            return Err(Error::Config("table observables need a countable chain".into()));
        }
    })
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn explicit_tail(t: &Option<TailConfig>) -> Result<Option<TailModel<f64>>> {
    t.map(|t| TailModel::new(t.alpha, SlowlyVarying::Constant(t.ell), t.c_plus, t.c_minus))
        .transpose()
        .map_err(config_err)
}

fn law_mean(law: &ImageLaw<f64>) -> Option<f64> {
    law.mean()
}

fn symmetric_mean(psi: &Observable<f64>, base: &Marginal<f64>) -> Option<f64> {
    match psi {
        Observable::Quantile { law, .. } => law_mean(law),
        Observable::Zero => Some(0.0),
        _ if *base == Marginal::StandardNormal => Some(0.0),
        _ => None,
    }
}

/// ArchSpec together with its tail constant.
pub fn arch_tail(spec: &ArchSpec<f64>, c: f64) -> Result<TailModel<f64>> {
    TailModel::new(spec.tail_index(), SlowlyVarying::Constant(c), 1.0, 1.0)
}

impl Setup {
    /// Validates `cfg`. `arch_constant` supplies the ARCH tail constant when
    /// the config leaves it open.
    pub fn from_config(
        cfg: &ExperimentConfig,
        arch_constant: impl FnOnce(&ArchSpec<f64>) -> Result<f64>,
    ) -> Result<Self> {
        cfg.check_grids()?;
        let given_tail = explicit_tail(&cfg.tail)?;
        let (built, derived_tail, mean) = build_chain(cfg, arch_constant)?;
        let tail = match (given_tail, derived_tail) {
            (Some(t), _) => t,
            (None, Some(t)) => t,
            (None, None) => {
                return Err(Error::Config("no tail model: add a [tail] section for this observable".into()));
            }
        };
        let case = AlphaCase::classify(&tail)?;
        if let Some(c) = cfg.alpha_case {
            if c != case {
                return Err(Error::Config(format!("alpha_case {c:?} does not match tail index {}", tail.alpha)));
            }
        }
        let setup = Setup { built, tail, case, centering: cfg.centering, stationary_mean: mean };
        setup.check_centering()?;
        Ok(setup)
    }

    fn check_centering(&self) -> Result<()> {
        match (self.centering, self.case) {
            (Centering::None, AlphaCase::OneToTwo) => match self.stationary_mean {
                Some(m) if m.abs() <= 1e-12 => Ok(()),
                Some(m) => Err(Error::Config(format!(
                    "centering = \"none\" with alpha in (1, 2) needs pi(Psi) = 0, got {m}"
                ))),
                None => Err(Error::Config(
                    "centering = \"none\" with alpha in (1, 2) needs pi(Psi) = 0, which is not known for this observable".into(),
                )),
            },
            (Centering::None, _) => Ok(()),
            (_, AlphaCase::BelowOne) | (_, AlphaCase::OneSymmetric) => Err(Error::Config(
                "centering applies only for alpha in (1, 2); use centering = \"none\"".into(),
            )),
            (Centering::Mean, AlphaCase::OneToTwo) => {
                if self.stationary_mean.is_none() {
                    return Err(Error::Config("centering = \"mean\" needs pi(Psi) in closed form".into()));
                }
                Ok(())
            }
            (Centering::Conditional, AlphaCase::OneToTwo) => match &self.built {
                Built::Arch { .. } => Err(Error::Config("conditional centering is not available for the ARCH chain".into())),
                Built::Ar1 { kernel, psi: Observable::Quantile { law, .. } } => {
                    let s2 = kernel.sd * kernel.sd;
                    if s2 < law.alpha() {
                        Ok(())
                    } else {
                        Err(Error::Config(format!(
                            "E(Psi | x) is infinite for this AR(1) chain: need 1 - rho^2 = {s2} < alpha = {}",
                            law.alpha()
                        )))
                    }
                }
                _ => Ok(()),
            },
        }
    }
}

/// The chain and observable of `cfg`, the tail model implied by them (if
/// any) and π(Ψ) when known in closed form.
pub fn build_chain(
    cfg: &ExperimentConfig,
    arch_constant: impl FnOnce(&ArchSpec<f64>) -> Result<f64>,
) -> Result<(Built, Option<TailModel<f64>>, Option<f64>)> {
    Ok(match &cfg.chain {
        ChainConfig::Iid { marginal } => {
            let o = cfg.observable.as_ref().ok_or_else(|| Error::Config("iid chain needs an observable".into()))?;
            let psi = real_observable(marginal, o)?;
            let tail = match &psi {
                Observable::Quantile { law, .. } => Some(law.tail_model().map_err(config_err)?),
                _ => None,
            };
            let mean = symmetric_mean(&psi, marginal);
            (Built::Iid { marginal: marginal.clone(), psi }, tail, mean)
        }
        ChainConfig::Ar1 { rho } => {
            let kernel = Ar1Kernel::new(Ar1Spec::new(*rho).map_err(config_err)?).map_err(config_err)?;
            let o = cfg.observable.as_ref().ok_or_else(|| Error::Config("ar1 chain needs an observable".into()))?;
            let psi = real_observable(&Marginal::StandardNormal, o)?;
            let tail = match &psi {
                Observable::Quantile { law, .. } => Some(law.tail_model().map_err(config_err)?),
                _ => None,
            };
            let mean = symmetric_mean(&psi, &Marginal::StandardNormal);
            (Built::Ar1 { kernel, psi }, tail, mean)
        }
        ChainConfig::BackwardRecurrence { gamma, truncation } => {
            let spec = BackwardRecurrenceSpec::new(*gamma).map_err(config_err)?;
            let k = truncation.unwrap_or_else(|| spec.truncation_for(MAX_MASS_DEFICIT));
            let values = match &cfg.observable {
                Some(ObservableConfig::Table { values }) => values.clone(),
                Some(ObservableConfig::Quantile { .. }) => {
                    return Err(Error::Config(
                        "quantile observables need a continuous marginal; the backward recurrence chain has an atomic stationary law"
                            .into(),
                    ))
                }
                _ => return Err(Error::Config("backward_recurrence chain needs a table observable".into())),
            };
            if values.len() != k + 1 {
                return Err(Error::Config(format!("table has {} values for states 0..={k}", values.len())));
            }
            let kernel = crate::chains::backward_recurrence_kernel(&spec, k)?;
            let mean = values.iter().zip(kernel.pi()).map(|(v, p)| v * p).sum();
            (Built::Countable { spec, truncation: k, values }, None, Some(mean))
        }
        ChainConfig::Skeleton { psi } => {
            if cfg.observable.is_some() {
                return Err(Error::Config("the skeleton chain fixes its own observable".into()));
            }
            let spec = SkeletonSpec::new(*psi).map_err(config_err)?;
            let tail = spec.tail_model().map_err(config_err)?;
            (Built::Skeleton { spec }, Some(tail), Some(0.0))
        }
        ChainConfig::Arch { beta, lambda, tail_constant, .. } => {
            if !matches!(cfg.observable, None | Some(ObservableConfig::Identity)) {
                return Err(Error::Config("the ARCH chain is observed through the identity".into()));
            }
            let spec = ArchSpec::new(*beta, *lambda).map_err(config_err)?;
            // κ(1) = 1 only to solver tolerance.
            if !(spec.tail_index() < 2.0 - 1e-9) {
                return Err(Error::Config(format!(
                    "ARCH tail index 2κ = {} is not below 2; choose lambda > 1",
                    spec.tail_index()
                )));
            }
            let c = match tail_constant {
                Some(c) => positive("tail_constant", *c)?,
                None => arch_constant(&spec)?,
            };
            (Built::Arch { spec }, Some(arch_tail(&spec, c)?), Some(0.0))
        }
    })
}
