//! Conditional expectations E[g(Ψ(X₁)) | X₀ = x] for the supported kernels.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::{
    Ar1Kernel, CountableKernel, IidKernel, SkeletonObservable, SkeletonSpec, SkeletonState, TableObservable,
};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, GaussHermite, Tolerance};
use crate::scalar::{normal_cdf, normal_pdf, normal_sf, Real};
use crate::tails::{ImageLaw, Marginal, Observable};

/// e^{ix} − 1 without cancellation for small x.
#[inline]
pub fn expm1_i<T: Real>(x: T) -> Complex<T> {
    let h = (x * T::lit(0.5)).sin();
    Complex::new(-T::lit(2.0) * h * h, x.sin())
}

/// Truncated conditional moments at a level L.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMoments<T> {
    /// E[Ψ 1{|Ψ| ≤ L}].
    pub mean: T,
    /// E[Ψ² 1{|Ψ| ≤ L}].
    pub second: T,
    /// P(|Ψ| > L).
    pub tail_prob: T,
}

/// Conditional law of Ψ(X₁) given X₀.
pub trait ConditionalLaw<T: Real>: Sync {
    type State: Copy + Send + Sync;
    type Obs: Sync;

    /// E[e^{iωΨ(X₁)} | X₀ = x] − 1.
    fn cf_minus_one(&self, x: &Self::State, obs: &Self::Obs, omega: T) -> Result<Complex<T>>;

    fn truncated(&self, x: &Self::State, obs: &Self::Obs, level: T) -> Result<TruncatedMoments<T>>;

    /// E[Ψ(X₁) | X₀ = x], when finite.
    fn mean(&self, x: &Self::State, obs: &Self::Obs) -> Result<T>;
}

impl<T: Real> ConditionalLaw<T> for CountableKernel<T> {
    type State = usize;
    type Obs = TableObservable<T>;

    fn cf_minus_one(&self, x: &usize, obs: &TableObservable<T>, omega: T) -> Result<Complex<T>> {
        check_table(self, obs)?;
        Ok(self.rows()[*x]
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &(k, p)| acc + expm1_i(omega * obs.0[k]) * p))
    }

    fn truncated(&self, x: &usize, obs: &TableObservable<T>, level: T) -> Result<TruncatedMoments<T>> {
        check_table(self, obs)?;
        let mut m = TruncatedMoments::default();
        for &(k, p) in &self.rows()[*x] {
            let v = obs.0[k];
            if v.abs() <= level {
                m.mean += p * v;
                m.second += p * v * v;
            } else {
                m.tail_prob += p;
            }
        }
        Ok(m)
    }

    fn mean(&self, x: &usize, obs: &TableObservable<T>) -> Result<T> {
        check_table(self, obs)?;
        Ok(self.rows()[*x].iter().map(|&(k, p)| p * obs.0[k]).sum())
    }
}

fn check_table<T: Real>(k: &CountableKernel<T>, obs: &TableObservable<T>) -> Result<()> {
    if obs.0.len() != k.size() {
        return Err(Error::InvalidParameter(format!(
            "observable table of length {} for {} states",
            obs.0.len(),
            k.size()
        )));
    }
    Ok(())
}

fn law_truncated<T: Real>(law: &ImageLaw<T>, level: T) -> TruncatedMoments<T> {
    TruncatedMoments {
        mean: law.truncated_mean(level),
        second: law.truncated_second(level),
        tail_prob: law.tail_prob(level),
    }
}

fn law_mean<T: Real>(law: &ImageLaw<T>) -> Result<T> {
    law.mean().ok_or_else(|| Error::Domain("the image law has no finite mean (alpha <= 1)".into()))
}

impl<T: Real> ConditionalLaw<T> for IidKernel<T> {
    type State = T;
    type Obs = Observable<T>;

    fn cf_minus_one(&self, _x: &T, obs: &Observable<T>, omega: T) -> Result<Complex<T>> {
        match obs {
            Observable::Quantile { law, .. } => law.cf_minus_one(omega),
            _ => match &self.marginal {
                Marginal::StandardNormal => gaussian_cf_minus_one(obs, T::zero(), T::one(), omega, &Rule::Adaptive),
                m => direct_marginal(m, |v| expm1_i(omega * obs.eval(v))),
            },
        }
    }

    fn truncated(&self, _x: &T, obs: &Observable<T>, level: T) -> Result<TruncatedMoments<T>> {
        match obs {
            Observable::Quantile { law, .. } => Ok(law_truncated(law, level)),
            _ => match &self.marginal {
                Marginal::StandardNormal => gaussian_truncated(obs, T::zero(), T::one(), level, &Rule::Adaptive),
                m => {
                    let mean = direct_marginal(m, |v| {
                        let p = obs.eval(v);
                        if p.abs() <= level {
                            p
                        } else {
                            T::zero()
                        }
                    })?;
                    let second = direct_marginal(m, |v| {
                        let p = obs.eval(v);
                        if p.abs() <= level {
                            p * p
                        } else {
                            T::zero()
                        }
                    })?;
                    let tail_prob =
                        direct_marginal(m, |v| if obs.eval(v).abs() > level { T::one() } else { T::zero() })?;
                    Ok(TruncatedMoments { mean, second, tail_prob })
                }
            },
        }
    }

    fn mean(&self, x: &T, obs: &Observable<T>) -> Result<T> {
        match obs {
            Observable::Quantile { law, .. } => law_mean(law),
            _ if obs.bound().is_finite() => Ok(self.truncated(x, obs, obs.bound())?.mean),
            _ => match &self.marginal {
                Marginal::StandardNormal => gaussian_mean(obs, T::zero(), T::one(), &Rule::Adaptive),
                m => direct_marginal(m, |v| obs.eval(v)),
            },
        }
    }
}

fn direct_marginal<T: Real, V: crate::quadrature::QuadValue<T>>(m: &Marginal<T>, f: impl Fn(T) -> V) -> Result<V> {
    match m {
        Marginal::Uniform { lo, hi } => {
            let w = *hi - *lo;
            let pts: Vec<T> = (0..=32).map(|i| *lo + w * T::lit(i as f64 / 32.0)).collect();
            let q = integrate(|v| f(v) * (T::one() / w), &pts, Tolerance::new(T::lit(1e-13)).with_rel(T::lit(1e-10)));
            conv(q, "uniform marginal expectation")
        }
        Marginal::Atomic { points, probs } => {
            Ok(points.iter().zip(probs).fold(V::zero(), |acc, (p, w)| acc + f(*p) * *w))
        }
        Marginal::StandardNormal => Err(Error::Unsupported("handled by the Gaussian rule".into())),
    }
}

fn conv<V, T: Real>(q: crate::quadrature::Quad<V, T>, what: &str) -> Result<V> {
    if q.converged || q.error <= T::lit(1e-8) {
        Ok(q.value)
    } else {
        q.require(what)
    }
}

impl<T: Real> ConditionalLaw<T> for SkeletonSpec<T> {
    type State = SkeletonState<T>;
    type Obs = SkeletonObservable<T>;

    fn cf_minus_one(&self, x: &SkeletonState<T>, obs: &SkeletonObservable<T>, omega: T) -> Result<Complex<T>> {
        Ok(match x.segment {
            0 => expm1_i(-omega * obs.psi_base(x.offset)),
            1 => Complex::new(T::zero(), T::zero()),
            _ => obs.law.cf_minus_one(omega)? * T::lit(0.5),
        })
    }

    fn truncated(&self, x: &SkeletonState<T>, obs: &SkeletonObservable<T>, level: T) -> Result<TruncatedMoments<T>> {
        Ok(match x.segment {
            0 => {
                let v = -obs.psi_base(x.offset);
                if v.abs() <= level {
                    TruncatedMoments { mean: v, second: v * v, tail_prob: T::zero() }
                } else {
                    TruncatedMoments { mean: T::zero(), second: T::zero(), tail_prob: T::one() }
                }
            }
            1 => TruncatedMoments::default(),
            _ => {
                let m = law_truncated(&obs.law, level);
                let h = T::lit(0.5);
                TruncatedMoments { mean: m.mean * h, second: m.second * h, tail_prob: m.tail_prob * h }
            }
        })
    }

    fn mean(&self, x: &SkeletonState<T>, obs: &SkeletonObservable<T>) -> Result<T> {
        match x.segment {
            0 => Ok(-obs.psi_base(x.offset)),
            1 => Ok(T::zero()),
            _ => Ok(law_mean(&obs.law)? * T::lit(0.5)),
        }
    }
}

/// Quadrature rule for expectations against the Gaussian AR(1) kernel.
#[derive(Debug, Clone)]
pub enum Rule<T> {
    /// Adaptive Gauss–Kronrod in the standardized next state, with the
    /// oscillatory power tails of quantile observables integrated by parts.
    Adaptive,
    /// Gauss–Hermite of the given order, checked against twice that order.
    GaussHermite { rule: GaussHermite<T>, check: GaussHermite<T> },
}

impl<T: Real> Rule<T> {
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        Ok(Rule::GaussHermite { rule: GaussHermite::new(order)?, check: GaussHermite::new(2 * order)? })
    }
}

/// Conditional law of the Gaussian AR(1) chain.
#[derive(Debug, Clone)]
pub struct Ar1Conditional<T> {
    pub kernel: Ar1Kernel<T>,
    pub rule: Rule<T>,
}

impl<T: Real> Ar1Conditional<T> {
    pub fn new(kernel: Ar1Kernel<T>) -> Self {
        Ar1Conditional { kernel, rule: Rule::Adaptive }
    }

    pub fn with_rule(kernel: Ar1Kernel<T>, rule: Rule<T>) -> Self {
        Ar1Conditional { kernel, rule }
    }
}

impl<T: Real> ConditionalLaw<T> for Ar1Conditional<T> {
    type State = T;
    type Obs = Observable<T>;

    fn cf_minus_one(&self, x: &T, obs: &Observable<T>, omega: T) -> Result<Complex<T>> {
        gaussian_cf_minus_one(obs, self.kernel.rho() * *x, self.kernel.sd, omega, &self.rule)
    }

    fn truncated(&self, x: &T, obs: &Observable<T>, level: T) -> Result<TruncatedMoments<T>> {
        gaussian_truncated(obs, self.kernel.rho() * *x, self.kernel.sd, level, &self.rule)
    }

    fn mean(&self, x: &T, obs: &Observable<T>) -> Result<T> {
        gaussian_mean(obs, self.kernel.rho() * *x, self.kernel.sd, &self.rule)
    }
}

const Z_MAX: f64 = 12.0;
/// Phase budget (radians) resolved by direct quadrature before switching to
/// integration by parts in the tails.
const PHASE_BUDGET: f64 = 200.0;

fn z_of<T: Real>(y: T, m: T, s: T) -> T {
    (y - m) / s
}

fn gh_check<T: Real, V: crate::quadrature::QuadValue<T>>(rule: &Rule<T>, f: impl Fn(T) -> V) -> Result<V> {
    let Rule::GaussHermite { rule, check } = rule else { unreachable!("Gauss–Hermite dispatch") };
    let a = rule.expect_normal(&f);
    let b = check.expect_normal(&f);
    let d = (a - b).magnitude();
    if d > T::lit(1e-6) {
        return Err(Error::Numeric(format!(
            "Gauss–Hermite self-check failed: orders {} and {} differ by {d}",
            rule.order(),
            check.order()
        )));
    }
    Ok(b)
}

/// Break points in z-space: kinks of Ψ plus a uniform partition.
fn body_points<T: Real>(obs: &Observable<T>, m: T, s: T, lo: T, hi: T) -> Vec<T> {
    let mut pts = Vec::with_capacity(70);
    let pieces = 48;
    for i in 0..=pieces {
        pts.push(lo + (hi - lo) * T::lit(i as f64 / pieces as f64));
    }
    let kinks: Vec<T> = match obs {
        Observable::Quantile { law, .. } => {
            let t0 = law.tail_onset();
            if t0 > T::zero() {
                vec![obs.inverse(-t0), obs.inverse(t0)]
            } else {
                vec![]
            }
        }
        Observable::ClippedCubic { bound } | Observable::ClippedIdentity { bound } => {
            vec![obs.inverse(-*bound * (T::one() - T::epsilon())), obs.inverse(*bound * (T::one() - T::epsilon()))]
        }
        _ => vec![],
    };
    for k in kinks {
        let z = z_of(k, m, s);
        if z.is_finite() && z > lo && z < hi {
            pts.push(z);
        }
    }
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    pts.dedup();
    pts
}

fn require_normal_base<T: Real>(obs: &Observable<T>) -> Result<()> {
    if let Observable::Quantile { base, .. } = obs {
        if *base != Marginal::StandardNormal {
            return Err(Error::Unsupported(
                "the Gaussian kernel rule needs a quantile observable over the standard normal marginal".into(),
            ));
        }
    }
    Ok(())
}

/// E[e^{iωΨ(m + sZ)}] − 1.
pub fn gaussian_cf_minus_one<T: Real>(obs: &Observable<T>, m: T, s: T, omega: T, rule: &Rule<T>) -> Result<Complex<T>> {
    require_normal_base(obs)?;
    let zero = Complex::new(T::zero(), T::zero());
    if omega == T::zero() {
        return Ok(zero);
    }
    match obs {
        Observable::Zero => return Ok(zero),
        Observable::Identity => {
            let e = Complex::new(-omega * omega * s * s * T::lit(0.5), omega * m);
            return Ok(Complex::new(e.re.exp_m1(), T::zero()) * Complex::new(e.im.cos(), e.im.sin()) + expm1_i(e.im));
        }
        _ => {}
    }
    if let Rule::GaussHermite { .. } = rule {
        return gh_check(rule, |z| expm1_i(omega * obs.eval(m + s * z)));
    }
    let w = omega.abs();
    let zmax = T::lit(Z_MAX);
    let tol = Tolerance::new(T::lit(1e-14)).with_rel(T::lit(1e-10));
    let integrand = |z: T| expm1_i(w * obs.eval(m + s * z)) * normal_pdf(z);
    let value = if obs.bound().is_finite() {
        let pts = body_points(obs, m, s, -zmax, zmax);
        conv(integrate(integrand, &pts, tol), "conditional characteristic function")?
    } else {
        let Observable::Quantile { law, .. } = obs else {
            return Err(Error::Unsupported("unbounded observable without a tail model".into()));
        };
        let mut budget = T::lit(PHASE_BUDGET);
        loop {
            let vstar = budget / w;
            let (ya, yb) = obs.level_set(vstar);
            let za = z_of(ya, m, s).max(-zmax);
            let zb = z_of(yb, m, s).min(zmax);
            let none = Some((zero, T::zero()));
            let upper = if zb < zmax { tail_by_parts(law, m, s, w, zb, true) } else { none };
            let lower = if za > -zmax { tail_by_parts(law, m, s, w, za, false) } else { none };
            let last = budget >= T::lit(PHASE_BUDGET * 256.0);
            if let (Some((u, eu)), Some((l, el))) = (upper, lower) {
                let pts = body_points(obs, m, s, za, zb);
                let body = if zb > za {
                    conv(integrate(integrand, &pts, tol), "conditional characteristic function")?
                } else {
                    zero
                };
                let total = body + u + l;
                let target = T::lit(1e-13) + T::lit(1e-9) * total.norm();
                if eu + el <= target || (last && eu + el <= T::lit(1e-8)) {
                    break total;
                }
            }
            if last {
                return Err(Error::Numeric(format!(
                    "tail expansion of the conditional characteristic function failed (omega = {omega}, m = {m})"
                )));
            }
            budget = budget * T::lit(4.0);
        }
    };
    Ok(if omega < T::zero() { value.conj() } else { value })
}

/// ∫ (e^{iωΨ(m+sz)} − 1) φ(z) dz over [z₀, ∞) (upper) or (−∞, z₀] (lower),
/// by two steps of integration by parts, with an estimate of the next term.
/// `None` if the expansion is not usable at z₀.
fn tail_by_parts<T: Real>(law: &ImageLaw<T>, m: T, s: T, w: T, z0: T, upper: bool) -> Option<(Complex<T>, T)> {
    let y = m + s * z0;
    let v = match law {
        _ => {
            let obs_u = normal_cdf(y);
            let obs_q = normal_sf(y);
            law.quantile_split(obs_u, obs_q)
        }
    };
    let dpsi = normal_pdf(y) / law.density(v);
    let dphase = w * s * dpsi;
    if !(dphase > T::zero()) || !dphase.is_finite() {
        return None;
    }
    let i = Complex::new(T::zero(), T::one());
    let a = i * (-normal_pdf(z0) / dphase);
    let ratio = (-z0 - s * (-y - law.dlog_density(v) * dpsi)) / dphase;
    if ratio.abs() > T::lit(0.05) {
        return None;
    }
    let e = Complex::new((w * v).cos(), (w * v).sin());
    let corr = Complex::new(T::one(), T::zero()) + i * ratio;
    let est = T::lit(2.0) * a.norm() * ratio * ratio;
    if upper {
        Some((-(e * a * corr) - Complex::new(normal_sf(z0), T::zero()), est))
    } else {
        Some((e * a * corr - Complex::new(normal_cdf(z0), T::zero()), est))
    }
}

/// Truncated moments of Ψ(m + sZ) at `level`.
pub fn gaussian_truncated<T: Real>(
    obs: &Observable<T>,
    m: T,
    s: T,
    level: T,
    rule: &Rule<T>,
) -> Result<TruncatedMoments<T>> {
    require_normal_base(obs)?;
    if !(level >= T::zero()) {
        return Err(Error::InvalidParameter(format!("truncation level must be nonnegative, got {level}")));
    }
    if level.is_infinite() {
        let mean = gaussian_mean(obs, m, s, rule)?;
        let second = gaussian_expect(obs, m, s, rule, -T::infinity(), T::infinity(), |p| p * p)?;
        return Ok(TruncatedMoments { mean, second, tail_prob: T::zero() });
    }
    let (ya, yb) = obs.level_set(level);
    let za = z_of(ya, m, s);
    let zb = z_of(yb, m, s);
    let tail_prob = if za.is_finite() { normal_cdf(za) } else { T::zero() }
        + if zb.is_finite() { normal_sf(zb) } else { T::zero() };
    if let Rule::GaussHermite { .. } = rule {
        let cut = |p: T| if p.abs() <= level { p } else { T::zero() };
        let mean = gh_check(rule, |z| cut(obs.eval(m + s * z)))?;
        let second = gh_check(rule, |z| {
            let c = cut(obs.eval(m + s * z));
            c * c
        })?;
        return Ok(TruncatedMoments { mean, second, tail_prob });
    }
    let zmax = T::lit(Z_MAX);
    let lo = za.max(-zmax);
    let hi = zb.min(zmax);
    if !(hi > lo) {
        return Ok(TruncatedMoments { mean: T::zero(), second: T::zero(), tail_prob });
    }
    let pts = body_points(obs, m, s, lo, hi);
    let tol = Tolerance::new(T::lit(1e-14)).with_rel(T::lit(1e-11));
    let pair = integrate(
        |z: T| {
            let p = obs.eval(m + s * z);
            let d = normal_pdf(z);
            Complex::new(p * d, p * p * d)
        },
        &pts,
        tol,
    );
    let pair = conv(pair, "truncated conditional moments")?;
    Ok(TruncatedMoments { mean: pair.re, second: pair.im, tail_prob })
}

fn gaussian_expect<T: Real>(
    obs: &Observable<T>,
    m: T,
    s: T,
    rule: &Rule<T>,
    lo: T,
    hi: T,
    g: impl Fn(T) -> T,
) -> Result<T> {
    if let Rule::GaussHermite { .. } = rule {
        return gh_check(rule, |z| g(obs.eval(m + s * z)));
    }
    let f = |z: T| g(obs.eval(m + s * z)) * normal_pdf(z);
    // Extend the range until the integrand is negligible at both ends.
    let mut zc = T::lit(8.0);
    let scale = g(obs.eval(m + s)).abs().max(T::one());
    while (f(zc).abs() + f(-zc).abs()) > T::lit(1e-20) * scale {
        zc = zc + T::one();
        if zc > T::lit(60.0) {
            return Err(Error::Domain("conditional moment is infinite or decays too slowly".into()));
        }
    }
    let lo = lo.max(-zc);
    let hi = hi.min(zc);
    let pts = body_points(obs, m, s, lo, hi);
    conv(integrate(f, &pts, Tolerance::new(T::lit(1e-14)).with_rel(T::lit(1e-11))), "conditional moment")
}

/// E[Ψ(m + sZ)].
pub fn gaussian_mean<T: Real>(obs: &Observable<T>, m: T, s: T, rule: &Rule<T>) -> Result<T> {
    require_normal_base(obs)?;
    match obs {
        Observable::Identity => Ok(m),
        Observable::Zero => Ok(T::zero()),
        Observable::Quantile { law, .. } => {
            let a = law.alpha();
            if !(a > T::one()) || !(s * s < a) {
                return Err(Error::Domain(format!(
                    "E[Psi | x] is infinite: need alpha > 1 and 1 - rho^2 < alpha (alpha = {a})"
                )));
            }
            gaussian_expect(obs, m, s, rule, -T::infinity(), T::infinity(), |p| p)
        }
        _ => gaussian_expect(obs, m, s, rule, -T::infinity(), T::infinity(), |p| p),
    }
}

/// A real-state conditional law evaluated on a grid of states and
/// interpolated with 4-point Lagrange polynomials, for fixed sets of
/// frequencies and truncation levels. States off the grid, and frequencies
/// or levels not tabulated, fall through to the wrapped law.
pub struct Tabulated<T: Real, L: ConditionalLaw<T, State = T>> {
    inner: L,
    x0: T,
    step: T,
    len: usize,
    /// Tabulated |ω| and cf − 1 at |ω|.
    cf: Vec<(T, Vec<Complex<T>>)>,
    moments: Vec<(T, Vec<TruncatedMoments<T>>)>,
    means: Option<Vec<T>>,
}

/// Grid used by `Tabulated::build`: 1801 points on [−9, 9].
pub const TABLE_HALF_WIDTH: f64 = 9.0;
pub const TABLE_POINTS: usize = 1801;

impl<T: Real, L: ConditionalLaw<T, State = T>> Tabulated<T, L> {
    pub fn build(inner: L, obs: &L::Obs, omegas: &[T], levels: &[T], with_mean: bool) -> Result<Self> {
        Self::build_on(inner, obs, omegas, levels, with_mean, T::lit(TABLE_HALF_WIDTH), TABLE_POINTS)
    }

    pub fn build_on(
        inner: L,
        obs: &L::Obs,
        omegas: &[T],
        levels: &[T],
        with_mean: bool,
        half_width: T,
        points: usize,
    ) -> Result<Self> {
        if points < 8 {
            return Err(Error::InvalidParameter("table needs at least 8 points".into()));
        }
        let x0 = -half_width;
        let step = (half_width + half_width) / T::lit((points - 1) as f64);
        let xs: Vec<T> = (0..points).map(|i| x0 + step * T::lit(i as f64)).collect();
        let mut ws: Vec<T> = omegas.iter().map(|w| w.abs()).filter(|w| *w > T::zero()).collect();
        ws.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        ws.dedup();
        let mut cf = Vec::with_capacity(ws.len());
        for w in ws {
            let vals: Result<Vec<Complex<T>>> = xs.par_iter().map(|x| inner.cf_minus_one(x, obs, w)).collect();
            cf.push((w, vals?));
        }
        let mut moments = Vec::with_capacity(levels.len());
        for &l in levels {
            let vals: Result<Vec<TruncatedMoments<T>>> = xs.par_iter().map(|x| inner.truncated(x, obs, l)).collect();
            moments.push((l, vals?));
        }
        let means =
            if with_mean { Some(xs.par_iter().map(|x| inner.mean(x, obs)).collect::<Result<Vec<T>>>()?) } else { None };
        Ok(Tabulated { inner, x0, step, len: points, cf, moments, means })
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }

    /// Index of the first of four stencil points and the interpolation weights.
    fn stencil(&self, x: T) -> Option<(usize, [T; 4])> {
        let u = (x - self.x0) / self.step;
        if !(u >= T::one()) || u > T::lit((self.len - 3) as f64) {
            return None;
        }
        let i = u.floor().to_usize()?.min(self.len - 3);
        let t = u - T::lit(i as f64);
        let (one, two, six) = (T::one(), T::lit(2.0), T::lit(6.0));
        // nodes at −1, 0, 1, 2 relative to i
        let w = [
            -t * (t - one) * (t - two) / six,
            (t + one) * (t - one) * (t - two) / two,
            -(t + one) * t * (t - two) / two,
            (t + one) * t * (t - one) / six,
        ];
        Some((i - 1, w))
    }
}

impl<T: Real, L: ConditionalLaw<T, State = T>> ConditionalLaw<T> for Tabulated<T, L> {
    type State = T;
    type Obs = L::Obs;

    fn cf_minus_one(&self, x: &T, obs: &L::Obs, omega: T) -> Result<Complex<T>> {
        let w = omega.abs();
        if let (Some((i, wt)), Some((_, tab))) = (self.stencil(*x), self.cf.iter().find(|(o, _)| *o == w)) {
            let v = tab[i] * wt[0] + tab[i + 1] * wt[1] + tab[i + 2] * wt[2] + tab[i + 3] * wt[3];
            return Ok(if omega < T::zero() { v.conj() } else { v });
        }
        self.inner.cf_minus_one(x, obs, omega)
    }

    fn truncated(&self, x: &T, obs: &L::Obs, level: T) -> Result<TruncatedMoments<T>> {
        if let (Some((i, wt)), Some((_, tab))) = (self.stencil(*x), self.moments.iter().find(|(l, _)| *l == level)) {
            let mut m = TruncatedMoments::default();
            for k in 0..4 {
                m.mean += tab[i + k].mean * wt[k];
                m.second += tab[i + k].second * wt[k];
                m.tail_prob += tab[i + k].tail_prob * wt[k];
            }
            return Ok(m);
        }
        self.inner.truncated(x, obs, level)
    }

    fn mean(&self, x: &T, obs: &L::Obs) -> Result<T> {
        if let (Some((i, wt)), Some(tab)) = (self.stencil(*x), &self.means) {
            return Ok((0..4).map(|k| tab[i + k] * wt[k]).sum());
        }
        self.inner.mean(x, obs)
    }
}
