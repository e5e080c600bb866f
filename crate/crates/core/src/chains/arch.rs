use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{stream_rng, MarkovKernel};
use crate::error::{invalid, Error, Result};
use crate::roots::bisect;
use crate::scalar::{Real, EULER_GAMMA};

/// Steps discarded from X₀ = 0 before a path counts as stationary.
pub const ARCH_BURN_IN: usize = 1000;

/// ARCH(1): X_{j+1} = √(β + λX_j²) Z_{j+1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec<T> {
    pub beta: T,
    pub lambda: T,
    /// Positive root of E(λZ²)^κ = 1.
    pub kappa: T,
    /// Number of terms kept in the S_∞ series.
    pub series_terms: usize,
}

impl<T: Real> ArchSpec<T> {
    pub fn new(beta: T, lambda: T) -> Result<Self> {
        if !(beta > T::zero()) {
            return invalid(format!("beta must be positive, got {beta}"));
        }
        let kappa = arch_kappa(lambda)?;
        Ok(ArchSpec { beta, lambda, kappa, series_terms: series_terms(lambda) })
    }

    /// Tail index 2κ of the stationary law.
    pub fn tail_index(&self) -> T {
        self.kappa + self.kappa
    }
}

/// ln E(λZ²)^u = u ln(2λ) + ln Γ(u + ½) − ln Γ(½).
pub fn arch_log_moment<T: Real>(lambda: T, u: T) -> T {
    let half = T::lit(0.5);
    u * (lambda + lambda).ln() + (u + half).ln_gamma() - half.ln_gamma()
}

pub fn arch_kappa<T: Real>(lambda: T) -> Result<T> {
    let upper = T::lit(2.0 * EULER_GAMMA.exp());
    if !(lambda > T::zero() && lambda < upper) {
        return invalid(format!("lambda must lie in (0, 2e^γ) = (0, {upper}), got {lambda}"));
    }
    let half = T::lit(0.5);
    // ln m is convex with ln m(0) = 0; its minimizer u* solves ψ(u + ½) = −ln 2λ.
    let target = -(lambda + lambda).ln();
    let mut hi = T::one();
    while (hi + half).digamma() < target {
        hi = hi + hi;
    }
    let ustar = bisect(|u: T| (u + half).digamma() - target, T::zero(), hi, T::lit(1e-15))?;
    let mut top = ustar.max(T::lit(1e-3)) * T::lit(2.0);
    while arch_log_moment(lambda, top) <= T::zero() {
        top = top + top;
        if top > T::lit(1e15) {
            return Err(Error::Numeric("kappa bracket search diverged".into()));
        }
    }
    let lo = if ustar > T::zero() { ustar } else { T::lit(1e-12) };
    let k = bisect(|u| arch_log_moment(lambda, u), lo, top, T::lit(1e-15))?;
    let resid = arch_log_moment(lambda, k).exp_m1().abs();
    if resid > T::lit(1e-10).max(T::tol_floor()) {
        return Err(Error::Numeric(format!("kappa residual {resid} too large")));
    }
    Ok(k)
}

#[inline]
pub fn arch_step<T: Real>(spec: &ArchSpec<T>, x: T, noise: T) -> T {
    (spec.beta + spec.lambda * x * x).sqrt() * noise
}

/// Terms of S_∞ after which the expected absolute remainder is below 1e−8.
fn series_terms<T: Real>(lambda: T) -> usize {
    let lam = lambda.as_f64();
    let r = (2.0 * lam / std::f64::consts::PI).sqrt();
    let tol = 1e-8f64;
    let j = if r < 1.0 {
        (tol * (1.0 - r)).ln() / r.ln()
    } else {
        let drift = 0.5 * (lam.ln() - EULER_GAMMA - std::f64::consts::LN_2);
        2.0 * tol.ln() / drift
    };
    (j.ceil() as usize).clamp(1, 100_000)
}

impl<T: Real> MarkovKernel<T> for ArchSpec<T> {
    type State = T;

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<T> {
        let mut x = T::zero();
        for _ in 0..ARCH_BURN_IN {
            x = arch_step(self, x, T::std_normal(rng));
        }
        if !x.is_finite() {
            return Err(Error::Numeric(format!("ARCH burn-in diverged (lambda = {})", self.lambda)));
        }
        Ok(x)
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, x: T, rng: &mut R) -> T {
        arch_step(self, x, T::std_normal(rng))
    }
}

/// One draw of the truncated series, or `None` when the remaining product
/// λ^{J/2} Π|Z_k| is still above 1e−6.
fn s_infinity_draw<T: Real, R: Rng + ?Sized>(spec: &ArchSpec<T>, rng: &mut R) -> Option<T> {
    let root = spec.lambda.sqrt();
    let mut prod = root;
    let mut s = T::zero();
    for _ in 0..spec.series_terms {
        let z = T::std_normal(rng);
        s += prod * z;
        prod = prod * root * z.abs();
    }
    let tail = prod / root;
    if s.is_finite() && tail <= T::lit(1e-6) {
        Some(s)
    } else {
        None
    }
}

/// S_∞ = Σ_{j≥1} λ^{j/2} (Π_{k<j} |Z_k|) Z_j, truncated after `series_terms`.
pub fn arch_s_infinity<T: Real>(spec: &ArchSpec<T>, seed: u64) -> Result<T> {
    let mut rng = stream_rng(seed, 0);
    s_infinity_draw(spec, &mut rng)
        .ok_or_else(|| Error::Numeric("S_infinity draw rejected: partial products did not decay".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauEstimate<T> {
    pub estimate: T,
    pub stderr: T,
    pub draws: usize,
    pub rejected: usize,
}

/// τ = E[|1 + S_∞|^{2κ} − |S_∞|^{2κ}].
pub fn arch_tau<T: Real>(spec: &ArchSpec<T>, n_draws: usize, seed: u64) -> Result<TauEstimate<T>> {
    if n_draws < 10_000 {
        return invalid(format!("arch_tau needs at least 10^4 draws, got {n_draws}"));
    }
    let mut rng = stream_rng(seed, 1);
    let p = spec.tail_index();
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    let mut kept = 0usize;
    let mut rejected = 0usize;
    while kept < n_draws {
        match s_infinity_draw(spec, &mut rng) {
            Some(s) => {
                let v = ((T::one() + s).abs().powf(p) - s.abs().powf(p)).as_f64();
                kept += 1;
                let d = v - mean;
                mean += d / kept as f64;
                m2 += d * (v - mean);
            }
            None => {
                rejected += 1;
                if rejected * 100 > n_draws {
                    return Err(Error::Numeric(format!(
                        "S_infinity rejection rate above 1% ({rejected} rejections before {kept} accepted draws)"
                    )));
                }
            }
        }
    }
    let var = m2 / (kept as f64 - 1.0);
    Ok(TauEstimate { estimate: T::lit(mean), stderr: T::lit((var / kept as f64).sqrt()), draws: kept, rejected })
}

/// Tail constant C with P(|X₀| > x) ~ C x^{−2κ}, read off the empirical tail
/// of a long stationary path: the median of (i/M)·|X|_{(i)}^{2κ} over the
/// order statistics between the 99% and 99.99% quantiles.
pub fn arch_tail_constant_empirical<T: Real>(spec: &ArchSpec<T>, path_len: usize, seed: u64) -> Result<T> {
    if path_len < 100_000 {
        return invalid("empirical tail constant needs a path of at least 10^5 steps");
    }
    let mut rng = stream_rng(seed, 2);
    let mut x = spec.initial(&mut rng)?;
    let mut a = Vec::with_capacity(path_len);
    for _ in 0..path_len {
        x = spec.step(x, &mut rng);
        a.push(x.abs().as_f64());
    }
    a.sort_unstable_by(|p, q| q.partial_cmp(p).unwrap_or(std::cmp::Ordering::Equal));
    let m = path_len as f64;
    let p = spec.tail_index().as_f64();
    let lo = (m * 1e-4).ceil() as usize;
    let hi = (m * 1e-2).floor() as usize;
    let mut c: Vec<f64> = (lo..=hi).map(|i| (i as f64 / m) * a[i - 1].powf(p)).collect();
    c.sort_unstable_by(|p, q| p.partial_cmp(q).unwrap_or(std::cmp::Ordering::Equal));
    Ok(T::lit(c[c.len() / 2]))
}

/// The same constant from its ratio representation
/// C = E[(β + λX₀²)^κ − (λX₀²)^κ] / (κ λ^κ (ln 2λ + ψ(κ + ½))),
/// the expectation taken over a thinned stationary path. Returns the
/// estimate and its standard error.
pub fn arch_tail_constant_goldie<T: Real>(spec: &ArchSpec<T>, n_samples: usize, seed: u64) -> Result<(T, T)> {
    if n_samples < 1000 {
        return invalid("ratio tail constant needs at least 10^3 samples");
    }
    let mut rng = stream_rng(seed, 3);
    let mut x = spec.initial(&mut rng)?;
    let (b, l, k) = (spec.beta.as_f64(), spec.lambda.as_f64(), spec.kappa.as_f64());
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for i in 0..n_samples {
        for _ in 0..10 {
            x = spec.step(x, &mut rng);
        }
        let lx2 = l * x.as_f64().powi(2);
        let v = if lx2 > 0.0 { lx2.powf(k) * (k * (b / lx2).ln_1p()).exp_m1() } else { b.powf(k) };
        let d = v - mean;
        mean += d / (i + 1) as f64;
        m2 += d * (v - mean);
    }
    let denom = k * l.powf(k) * ((2.0 * l).ln() + statrs::function::gamma::digamma(k + 0.5));
    if !(denom > 0.0) {
        return Err(Error::Numeric("non-positive denominator in tail constant ratio".into()));
    }
    let se = (m2 / (n_samples as f64 - 1.0) / n_samples as f64).sqrt();
    Ok((T::lit(mean / denom), T::lit(se / denom)))
}
