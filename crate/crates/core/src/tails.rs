//! Regularly varying tail models, normalizing sequences and heavy-tailed
//! observables.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::roots::bisect;
use crate::scalar::{normal_cdf, normal_isf, normal_pdf, normal_sf, pow_diff, Real};
use crate::stable::unit_levy_integral;

/// Slowly varying factor ℓ in π(|Ψ| > t) = t^{−α} ℓ(t).
#[derive(Clone)]
pub enum SlowlyVarying<T> {
    Constant(T),
    Function(Arc<dyn Fn(T) -> T + Send + Sync>),
}

impl<T: Real> SlowlyVarying<T> {
    pub fn eval(&self, t: T) -> T {
        match self {
            SlowlyVarying::Constant(c) => *c,
            SlowlyVarying::Function(f) => f(t),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for SlowlyVarying<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlowlyVarying::Constant(c) => write!(f, "Constant({c:?})"),
            SlowlyVarying::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TailModel<T> {
    pub alpha: T,
    pub ell: SlowlyVarying<T>,
    pub c_plus: T,
    pub c_minus: T,
}

impl<T: Real> TailModel<T> {
    pub fn new(alpha: T, ell: SlowlyVarying<T>, c_plus: T, c_minus: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::lit(2.0)) {
            return invalid(format!("tail index must lie in (0, 2), got {alpha}"));
        }
        if !(c_plus >= T::zero() && c_minus >= T::zero() && c_plus + c_minus > T::zero()) {
            return invalid(format!("invalid balance constants ({c_plus}, {c_minus})"));
        }
        if let SlowlyVarying::Constant(c) = ell {
            if !(c > T::zero()) {
                return invalid(format!("constant slowly varying factor must be positive, got {c}"));
            }
        }
        Ok(TailModel { alpha, ell, c_plus, c_minus })
    }

    /// ℓ ≡ c₊ + c₋, the exact-Pareto case.
    pub fn pareto(alpha: T, c_plus: T, c_minus: T) -> Result<Self> {
        Self::new(alpha, SlowlyVarying::Constant(c_plus + c_minus), c_plus, c_minus)
    }

    /// Model tail t^{−α} ℓ(t).
    pub fn tail(&self, t: T) -> T {
        t.powf(-self.alpha) * self.ell.eval(t)
    }

    pub fn solve_bn(&self, n: u64) -> Result<T> {
        solve_bn(n, self)
    }
}

/// B with n ℓ(B) / B^α = c₊ + c₋.
pub fn solve_bn<T: Real>(n: u64, tm: &TailModel<T>) -> Result<T> {
    if n == 0 {
        return invalid("n must be at least 1");
    }
    let total = tm.c_plus + tm.c_minus;
    let nf = T::lit(n as f64);
    let inv_a = T::one() / tm.alpha;
    match &tm.ell {
        SlowlyVarying::Constant(l) => {
            let b = (nf * *l / total).powf(inv_a);
            if !(b.is_finite() && b > T::zero()) {
                return Err(Error::Numeric(format!("solve_Bn(n = {n}): B_n = {b} is not representable")));
            }
            Ok(b)
        }
        SlowlyVarying::Function(ell) => {
            let g = |b: T| (nf * ell(b) / total).ln() - tm.alpha * b.ln();
            let hi = T::lit((n.max(2)) as f64).powf(T::lit(2.0) * inv_a);
            bisect(g, T::one(), hi, T::lit(1e-13)).map_err(|e| {
                Error::Numeric(format!("solve_Bn(n = {n}): no root of n·ℓ(B)/B^α = c₊+c₋ on [1, {hi}]: {e}"))
            })
        }
    }
}

/// Two-sided Pareto law: P(V > t) = c₊ t^{−α} and P(V < −t) = c₋ t^{−α}
/// for t ≥ t₀, with the remaining mass spread uniformly on [−t₀, t₀].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParetoParams<T>", into = "ParetoParams<T>", bound = "T: Real")]
pub struct TwoSidedPareto<T> {
    pub alpha: T,
    pub c_plus: T,
    pub c_minus: T,
    pub t0: T,
    pub center_mass: T,
}

/// Serialized form of [`TwoSidedPareto`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
struct ParetoParams<T> {
    alpha: T,
    c_plus: T,
    c_minus: T,
    #[serde(default = "half")]
    tail_mass: T,
}

fn half<T: Real>() -> T {
    T::lit(0.5)
}

impl<T: Real> TryFrom<ParetoParams<T>> for TwoSidedPareto<T> {
    type Error = Error;

    fn try_from(p: ParetoParams<T>) -> Result<Self> {
        Self::with_tail_mass(p.alpha, p.c_plus, p.c_minus, p.tail_mass)
    }
}

impl<T: Real> From<TwoSidedPareto<T>> for ParetoParams<T> {
    fn from(p: TwoSidedPareto<T>) -> Self {
        ParetoParams { alpha: p.alpha, c_plus: p.c_plus, c_minus: p.c_minus, tail_mass: T::one() - p.center_mass }
    }
}

impl<T: Real> TwoSidedPareto<T> {
    /// Half of the mass in the power tails.
    pub fn new(alpha: T, c_plus: T, c_minus: T) -> Result<Self> {
        Self::with_tail_mass(alpha, c_plus, c_minus, T::lit(0.5))
    }

    pub fn with_tail_mass(alpha: T, c_plus: T, c_minus: T, tail_mass: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::lit(2.0)) {
            return invalid(format!("alpha must lie in (0, 2), got {alpha}"));
        }
        if !(c_plus >= T::zero() && c_minus >= T::zero() && c_plus + c_minus > T::zero()) {
            return invalid(format!("invalid balance constants ({c_plus}, {c_minus})"));
        }
        if !(tail_mass > T::zero() && tail_mass < T::one()) {
            return invalid(format!("tail mass must lie in (0, 1), got {tail_mass}"));
        }
        let t0 = ((c_plus + c_minus) / tail_mass).powf(T::one() / alpha);
        Ok(TwoSidedPareto { alpha, c_plus, c_minus, t0, center_mass: T::one() - tail_mass })
    }

    fn lower_mass(&self) -> T {
        self.c_minus * self.t0.powf(-self.alpha)
    }

    fn upper_mass(&self) -> T {
        self.c_plus * self.t0.powf(-self.alpha)
    }

    /// P(V ≤ x).
    pub fn cdf(&self, x: T) -> T {
        if x <= -self.t0 {
            self.c_minus * (-x).powf(-self.alpha)
        } else if x < self.t0 {
            self.lower_mass() + self.center_mass * (x + self.t0) / (self.t0 + self.t0)
        } else {
            T::one() - self.sf(x)
        }
    }

    /// P(V > x).
    pub fn sf(&self, x: T) -> T {
        if x >= self.t0 {
            self.c_plus * x.powf(-self.alpha)
        } else if x > -self.t0 {
            self.upper_mass() + self.center_mass * (self.t0 - x) / (self.t0 + self.t0)
        } else {
            T::one() - self.cdf(x)
        }
    }

    /// Inverse of `cdf`.
    pub fn quantile(&self, u: T) -> T {
        self.quantile_split(u, T::one() - u)
    }

    /// Inverse given both u = P(V ≤ x) and q = P(V > x); the smaller one is
    /// used so that both tails keep full relative precision.
    pub fn quantile_split(&self, u: T, q: T) -> T {
        if u <= q {
            let lm = self.lower_mass();
            if u <= lm {
                -(self.c_minus / u).powf(T::one() / self.alpha)
            } else {
                -self.t0 + (self.t0 + self.t0) * (u - lm) / self.center_mass
            }
        } else {
            let um = self.upper_mass();
            if q <= um {
                (self.c_plus / q).powf(T::one() / self.alpha)
            } else {
                self.t0 - (self.t0 + self.t0) * (q - um) / self.center_mass
            }
        }
    }

    pub fn density(&self, x: T) -> T {
        let a = self.alpha;
        if x >= self.t0 {
            a * self.c_plus * x.powf(-a - T::one())
        } else if x <= -self.t0 {
            a * self.c_minus * (-x).powf(-a - T::one())
        } else {
            self.center_mass / (self.t0 + self.t0)
        }
    }

    /// d/dx ln density.
    pub fn dlog_density(&self, x: T) -> T {
        if x.abs() >= self.t0 {
            -(self.alpha + T::one()) / x
        } else {
            T::zero()
        }
    }

    /// P(|V| > level).
    pub fn tail_prob(&self, level: T) -> T {
        let a = self.alpha;
        if level >= self.t0 {
            (self.c_plus + self.c_minus) * level.powf(-a)
        } else if level < T::zero() {
            T::one()
        } else {
            (self.c_plus + self.c_minus) * self.t0.powf(-a) + self.center_mass * (T::one() - level / self.t0)
        }
    }

    /// E[V 1{|V| ≤ level}].
    pub fn truncated_mean(&self, level: T) -> T {
        if level <= self.t0 {
            return T::zero();
        }
        let a = self.alpha;
        (self.c_plus - self.c_minus) * a * pow_diff(self.t0, level, T::one() - a)
    }

    /// E[V² 1{|V| ≤ level}].
    pub fn truncated_second(&self, level: T) -> T {
        if level <= T::zero() {
            return T::zero();
        }
        let l = level.min(self.t0);
        let center = self.center_mass * l * l * l / (T::lit(3.0) * self.t0);
        if level <= self.t0 {
            return center;
        }
        let a = self.alpha;
        center + (self.c_plus + self.c_minus) * a * pow_diff(self.t0, level, T::lit(2.0) - a)
    }

    pub fn mean(&self) -> Option<T> {
        let a = self.alpha;
        if a <= T::one() {
            return None;
        }
        Some((self.c_plus - self.c_minus) * a * self.t0.powf(T::one() - a) / (a - T::one()))
    }

    /// E e^{iωV} − 1.
    pub fn cf_minus_one(&self, omega: T) -> Result<Complex<T>> {
        let zero = T::zero();
        if omega == zero {
            return Ok(Complex::new(zero, zero));
        }
        let s = omega.abs();
        let x = s * self.t0;
        let sinc_m1 = if x < T::lit(1e-3) {
            let x2 = x * x;
            -x2 / T::lit(6.0) + x2 * x2 / T::lit(120.0)
        } else {
            x.sin() / x - T::one()
        };
        let j = unit_levy_integral(self.alpha, x, zero)?;
        let (a, b) = if omega > zero { (j, j.conj()) } else { (j.conj(), j) };
        let tails = (a * self.c_plus + b * self.c_minus) * s.powf(self.alpha);
        Ok(tails + Complex::new(self.center_mass * sinc_m1, zero))
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = T::open_unit(rng);
        self.quantile_split(u, T::one() - u)
    }
}

/// Image laws available for quantile observables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", bound = "T: Real")]
pub enum ImageLaw<T> {
    Pareto(TwoSidedPareto<T>),
    /// Cauchy with the given scale; symmetric 1-stable.
    Cauchy {
        scale: T,
    },
}

impl<T: Real> ImageLaw<T> {
    /// Parameter check for laws built field by field.
    pub fn validate(&self) -> Result<()> {
        match self {
            ImageLaw::Pareto(p) => {
                TwoSidedPareto::with_tail_mass(p.alpha, p.c_plus, p.c_minus, T::one() - p.center_mass).map(|_| ())
            }
            ImageLaw::Cauchy { scale } if *scale > T::zero() && scale.is_finite() => Ok(()),
            ImageLaw::Cauchy { scale } => invalid(format!("Cauchy scale must be positive and finite, got {scale}")),
        }
    }

    pub fn alpha(&self) -> T {
        match self {
            ImageLaw::Pareto(p) => p.alpha,
            ImageLaw::Cauchy { .. } => T::one(),
        }
    }

    /// Asymptotic constants (c₊, c₋) of P(V > t) and P(V < −t) at t^{−α}.
    pub fn tail_constants(&self) -> (T, T) {
        match self {
            ImageLaw::Pareto(p) => (p.c_plus, p.c_minus),
            ImageLaw::Cauchy { scale } => (*scale / T::PI(), *scale / T::PI()),
        }
    }

    /// Point beyond which the law is an exact power tail; zero if none.
    pub fn tail_onset(&self) -> T {
        match self {
            ImageLaw::Pareto(p) => p.t0,
            ImageLaw::Cauchy { .. } => T::zero(),
        }
    }

    pub fn cdf(&self, x: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.cdf(x),
            ImageLaw::Cauchy { scale } => {
                if x <= T::zero() {
                    (*scale / -x).atan() / T::PI()
                } else {
                    T::one() - (*scale / x).atan() / T::PI()
                }
            }
        }
    }

    pub fn sf(&self, x: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.sf(x),
            ImageLaw::Cauchy { .. } => self.cdf(-x),
        }
    }

    pub fn quantile_split(&self, u: T, q: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.quantile_split(u, q),
            ImageLaw::Cauchy { scale } => {
                if u <= q {
                    -*scale / (T::PI() * u).tan()
                } else {
                    *scale / (T::PI() * q).tan()
                }
            }
        }
    }

    pub fn density(&self, x: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.density(x),
            ImageLaw::Cauchy { scale } => *scale / (T::PI() * (*scale * *scale + x * x)),
        }
    }

    pub fn dlog_density(&self, x: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.dlog_density(x),
            ImageLaw::Cauchy { scale } => -(x + x) / (*scale * *scale + x * x),
        }
    }

    pub fn tail_prob(&self, level: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.tail_prob(level),
            ImageLaw::Cauchy { scale } => {
                if level <= T::zero() {
                    T::one()
                } else {
                    T::lit(2.0) * (*scale / level).atan() / T::PI()
                }
            }
        }
    }

    pub fn truncated_mean(&self, level: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.truncated_mean(level),
            ImageLaw::Cauchy { .. } => T::zero(),
        }
    }

    pub fn truncated_second(&self, level: T) -> T {
        match self {
            ImageLaw::Pareto(p) => p.truncated_second(level),
            ImageLaw::Cauchy { scale } => {
                if level <= T::zero() {
                    return T::zero();
                }
                let s = *scale;
                T::lit(2.0) * s / T::PI() * (level - s * (level / s).atan())
            }
        }
    }

    pub fn mean(&self) -> Option<T> {
        match self {
            ImageLaw::Pareto(p) => p.mean(),
            ImageLaw::Cauchy { .. } => None,
        }
    }

    pub fn cf_minus_one(&self, omega: T) -> Result<Complex<T>> {
        match self {
            ImageLaw::Pareto(p) => p.cf_minus_one(omega),
            ImageLaw::Cauchy { scale } => Ok(Complex::new((-*scale * omega.abs()).exp_m1(), T::zero())),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let u = T::open_unit(rng);
        self.quantile_split(u, T::one() - u)
    }

    pub fn tail_model(&self) -> Result<TailModel<T>> {
        let (cp, cm) = self.tail_constants();
        TailModel::pareto(self.alpha(), cp, cm)
    }
}

/// Stationary marginal of a real-valued chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal<T> {
    StandardNormal,
    Uniform {
        lo: T,
        hi: T,
    },
    /// Purely atomic law on a finite set of points.
    Atomic {
        points: Vec<T>,
        probs: Vec<T>,
    },
}

impl<T: Real> Marginal<T> {
    pub fn is_continuous(&self) -> bool {
        !matches!(self, Marginal::Atomic { .. })
    }

    /// (P(X ≤ x), P(X > x)), each to full relative precision.
    pub fn cdf_pair(&self, x: T) -> (T, T) {
        match self {
            Marginal::StandardNormal => (normal_cdf(x), normal_sf(x)),
            Marginal::Uniform { lo, hi } => {
                let u = ((x - *lo) / (*hi - *lo)).max(T::zero()).min(T::one());
                (u, (*hi - x).max(T::zero()).min(*hi - *lo) / (*hi - *lo))
            }
            Marginal::Atomic { points, probs } => {
                let u: T = points.iter().zip(probs).filter(|(p, _)| **p <= x).map(|(_, w)| *w).sum();
                (u, T::one() - u)
            }
        }
    }

    /// Inverse of `cdf_pair` for continuous marginals.
    pub fn quantile_split(&self, u: T, q: T) -> T {
        match self {
            Marginal::StandardNormal => {
                if u <= q {
                    -normal_isf(u)
                } else {
                    normal_isf(q)
                }
            }
            Marginal::Uniform { lo, hi } => {
                if u <= q {
                    *lo + u * (*hi - *lo)
                } else {
                    *hi - q * (*hi - *lo)
                }
            }
            Marginal::Atomic { points, probs } => {
                let mut acc = T::zero();
                for (p, w) in points.iter().zip(probs) {
                    acc += *w;
                    if acc >= u {
                        return *p;
                    }
                }
                *points.last().unwrap_or(&T::zero())
            }
        }
    }

    pub fn density(&self, x: T) -> T {
        match self {
            Marginal::StandardNormal => normal_pdf(x),
            Marginal::Uniform { lo, hi } => {
                if x >= *lo && x < *hi {
                    T::one() / (*hi - *lo)
                } else {
                    T::zero()
                }
            }
            Marginal::Atomic { .. } => T::nan(),
        }
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        match self {
            Marginal::StandardNormal => T::std_normal(rng),
            Marginal::Uniform { lo, hi } => *lo + T::open_unit(rng) * (*hi - *lo),
            Marginal::Atomic { .. } => {
                let u = T::open_unit(rng);
                self.quantile_split(u, T::one() - u)
            }
        }
    }
}

/// Nondecreasing maps from a real state space to the reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum Observable<T> {
    /// Ψ(x) = law quantile of base_cdf(x).
    Quantile {
        base: Marginal<T>,
        law: ImageLaw<T>,
    },
    /// Ψ(x) = clamp(x³, −bound, bound).
    ClippedCubic {
        bound: T,
    },
    /// Ψ(x) = clamp(x, −bound, bound).
    ClippedIdentity {
        bound: T,
    },
    Identity,
    Zero,
}

impl<T: Real> Observable<T> {
    #[inline]
    pub fn eval(&self, x: T) -> T {
        match self {
            Observable::Quantile { base, law } => {
                let (u, q) = base.cdf_pair(x);
                law.quantile_split(u, q)
            }
            Observable::ClippedCubic { bound } => (x * x * x).max(-*bound).min(*bound),
            Observable::ClippedIdentity { bound } => x.max(-*bound).min(*bound),
            Observable::Identity => x,
            Observable::Zero => T::zero(),
        }
    }

    /// sup |Ψ|, infinite for unbounded observables.
    pub fn bound(&self) -> T {
        match self {
            Observable::ClippedCubic { bound } | Observable::ClippedIdentity { bound } => *bound,
            Observable::Zero => T::zero(),
            _ => T::infinity(),
        }
    }

    /// x with Ψ(x) = v; ±∞ when v is outside the open range of Ψ.
    pub fn inverse(&self, v: T) -> T {
        let inf = T::infinity();
        match self {
            Observable::Quantile { base, law } => {
                let u = law.cdf(v);
                let q = law.sf(v);
                if u <= T::zero() {
                    -inf
                } else if q <= T::zero() {
                    inf
                } else {
                    base.quantile_split(u, q)
                }
            }
            Observable::ClippedCubic { bound } => {
                if v >= *bound {
                    inf
                } else if v <= -*bound {
                    -inf
                } else {
                    v.cbrt()
                }
            }
            Observable::ClippedIdentity { bound } => {
                if v >= *bound {
                    inf
                } else if v <= -*bound {
                    -inf
                } else {
                    v
                }
            }
            Observable::Identity => v,
            Observable::Zero => {
                if v > T::zero() {
                    inf
                } else {
                    -inf
                }
            }
        }
    }

    /// The interval {x : |Ψ(x)| ≤ level} (end points may be infinite).
    pub fn level_set(&self, level: T) -> (T, T) {
        if level >= self.bound() {
            return (-T::infinity(), T::infinity());
        }
        (self.inverse(-level), self.inverse(level))
    }
}

#[derive(Debug, Clone)]
pub struct ObservableSpec<T> {
    pub psi: Observable<T>,
    pub tail: Option<TailModel<T>>,
}

impl<T: Real> ObservableSpec<T> {
    pub fn bounded(psi: Observable<T>) -> Self {
        ObservableSpec { psi, tail: None }
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        self.psi.eval(x)
    }
}

/// Ψ = target quantile ∘ base CDF; the image of the base law is exactly the
/// target law.
pub fn quantile_observable<T: Real>(base: &Marginal<T>, target: &TwoSidedPareto<T>) -> Result<ObservableSpec<T>> {
    quantile_observable_law(base, &ImageLaw::Pareto(*target))
}

pub fn quantile_observable_law<T: Real>(base: &Marginal<T>, target: &ImageLaw<T>) -> Result<ObservableSpec<T>> {
    if !base.is_continuous() {
        return Err(Error::Unsupported(
            "quantile observables need a continuous base marginal; an atomic marginal gives a step tail".into(),
        ));
    }
    Ok(ObservableSpec {
        psi: Observable::Quantile { base: base.clone(), law: *target },
        tail: Some(target.tail_model()?),
    })
}

/// Hill estimator of the tail index from the k largest |samples|.
pub fn hill_estimate<T: Real>(samples: &[T], k: usize) -> Result<T> {
    if k == 0 || k >= samples.len() {
        return Err(Error::Numeric(format!("need 0 < k < {} for the Hill estimator, got {k}", samples.len())));
    }
    let mut a: Vec<T> = samples.iter().map(|x| x.abs()).collect();
    if a.iter().any(|x| x.is_nan()) {
        return Err(Error::Numeric("NaN in Hill estimator input".into()));
    }
    let cmp = |x: &T, y: &T| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal);
    a.select_nth_unstable_by(k, cmp);
    let threshold = a[k];
    if !(threshold > T::zero()) {
        return Err(Error::Numeric("Hill threshold order statistic is zero".into()));
    }
    let s: T = a[..k].iter().map(|x| (*x / threshold).ln()).sum();
    if !(s > T::zero()) {
        return Err(Error::Numeric("degenerate upper order statistics in Hill estimator".into()));
    }
    Ok(T::lit(k as f64) / s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_bn() {
        let tm = TailModel::pareto(1.0, 0.5, 0.5).unwrap();
        assert!((solve_bn(1234, &tm).unwrap() - 1234.0f64).abs() < 1e-9);
        let tm = TailModel::pareto(0.5, 0.5, 0.5).unwrap();
        assert!((solve_bn(100, &tm).unwrap() - 1e4f64).abs() < 1e-7);
    }

    #[test]
    fn log_factor_bn_residual() {
        let ell = SlowlyVarying::Function(Arc::new(|t: f64| (std::f64::consts::E + t).ln()));
        let tm = TailModel::new(1.5, ell, 0.5, 0.5).unwrap();
        let b = solve_bn(10_000, &tm).unwrap();
        let resid = 1e4 * (std::f64::consts::E + b).ln() / b.powf(1.5) - 1.0;
        assert!(resid.abs() < 1e-10, "residual {resid}");
    }

    #[test]
    fn pathological_ell_reports_bracket_failure() {
        let ell = SlowlyVarying::Function(Arc::new(|_t: f64| 1e-9));
        let tm = TailModel::new(1.0, ell, 0.5, 0.5).unwrap();
        assert!(matches!(solve_bn(10, &tm), Err(Error::Numeric(_))));
    }

    #[test]
    fn pareto_tail_and_inverse() {
        let p = TwoSidedPareto::<f64>::new(1.3, 0.7, 0.3).unwrap();
        for &t in &[p.t0, 2.0 * p.t0, 1e6] {
            assert!((p.tail_prob(t) * t.powf(1.3) - 1.0).abs() < 1e-12);
        }
        for &x in &[-1e5, -3.0 * p.t0, -0.5, 0.0, 0.2, p.t0 * 1.01, 1e8] {
            let y = p.quantile_split(p.cdf(x), p.sf(x));
            assert!((y - x).abs() <= 1e-9 * x.abs().max(1.0), "{x} -> {y}");
        }
        assert!((p.cdf(0.3) + p.sf(0.3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_moments_match_quadrature() {
        use crate::quadrature::{integrate, Tolerance};
        let p = TwoSidedPareto::<f64>::new(1.4, 0.6, 0.2).unwrap();
        let level = 7.5;
        let pts = [-level, -p.t0, p.t0, level];
        let m: f64 = integrate(|x| x * p.density(x), &pts, Tolerance::new(1e-12)).value;
        let s: f64 = integrate(|x| x * x * p.density(x), &pts, Tolerance::new(1e-12)).value;
        let mass: f64 = integrate(|x| p.density(x), &pts, Tolerance::new(1e-12)).value;
        assert!((m - p.truncated_mean(level)).abs() < 1e-10);
        assert!((s - p.truncated_second(level)).abs() < 1e-10);
        assert!((1.0 - mass - p.tail_prob(level)).abs() < 1e-10);
    }

    #[test]
    fn pareto_cf_matches_direct_quadrature() {
        use crate::quadrature::{integrate, Tolerance};
        let p = TwoSidedPareto::<f64>::new(0.8, 1.0, 0.4).unwrap();
        for &w in &[-2.0, 0.05, 0.7] {
            let got = p.cf_minus_one(w).unwrap();
            let mut pts = vec![-p.t0, p.t0];
            let mut x = p.t0;
            while x < 4e4 {
                x += std::f64::consts::PI / w.abs();
                pts.push(x);
                pts.insert(0, -x);
            }
            let f = |x: f64| Complex::new((w * x).cos() - 1.0, (w * x).sin()) * p.density(x);
            let body: Complex<f64> = integrate(f, &pts, Tolerance::new(1e-12)).value;
            // remaining tails beyond the window, handled analytically
            let xe = *pts.last().unwrap();
            let rest = |c: f64, s: f64| {
                let j = unit_levy_integral(0.8, w.abs() * xe, 0.0).unwrap();
                let j = if s * w > 0.0 { j } else { j.conj() };
                j * (c * w.abs().powf(0.8))
            };
            let total = body + rest(1.0, 1.0) + rest(0.4, -1.0);
            assert!((total - got).norm() < 1e-8, "w={w}: {total} vs {got}");
        }
    }

    #[test]
    fn hill_scale_invariant_and_accurate() {
        let p = TwoSidedPareto::new(1.0, 0.5, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let xs: Vec<f64> = (0..100_000).map(|_| p.sample(&mut rng)).collect();
        let a = hill_estimate(&xs, 1000).unwrap();
        assert!((0.9..=1.1).contains(&a), "{a}");
        let ys: Vec<f64> = xs.iter().map(|x| 3.7 * x).collect();
        assert!((hill_estimate(&ys, 1000).unwrap() - a).abs() < 1e-10);
        assert!(hill_estimate(&[0.0; 10], 3).is_err());
    }

    #[test]
    fn quantile_observable_properties() {
        let p = TwoSidedPareto::<f64>::new(0.8, 0.5, 0.5).unwrap();
        let spec = quantile_observable(&Marginal::StandardNormal, &p).unwrap();
        for &x in &[0.3, 1.7, 5.0, 8.5] {
            assert!((spec.eval(x) + spec.eval(-x)).abs() <= 1e-12 * spec.eval(x).abs());
        }
        assert_eq!(spec.eval(0.0), 0.0);
        let atomic = Marginal::Atomic { points: vec![0.0, 1.0], probs: vec![0.5, 0.5] };
        assert!(matches!(quantile_observable(&atomic, &p), Err(Error::Unsupported(_))));
    }

    #[test]
    fn observable_inverse_round_trip() {
        let p = TwoSidedPareto::<f64>::new(1.5, 0.7, 0.3).unwrap();
        let obs = quantile_observable(&Marginal::StandardNormal, &p).unwrap().psi;
        for &x in &[-7.0, -1.0, 0.1, 2.0, 9.0] {
            let back = obs.inverse(obs.eval(x));
            assert!((back - x).abs() < 1e-9, "{x} -> {back}");
        }
        let cub = Observable::<f64>::ClippedCubic { bound: 8.0 };
        assert_eq!(cub.level_set(1.0), (-1.0, 1.0));
        assert!(cub.level_set(9.0).1.is_infinite());
    }
}
