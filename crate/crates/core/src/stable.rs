//! Stable laws given by their Lévy measure
//! ν(dx) = α(c₊ x^{−α−1} 1{x>0} + c₋ |x|^{−α−1} 1{x<0}) dx.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::scalar::{pow_diff, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams<T> {
    pub alpha: T,
    pub c_plus: T,
    pub c_minus: T,
    /// Truncation level of the compensator.
    pub h: T,
    /// Shift a^h.
    pub a_h: T,
}

impl<T: Real> StableParams<T> {
    pub fn new(alpha: T, c_plus: T, c_minus: T, h: T, a_h: T) -> Result<Self> {
        let p = StableParams { alpha, c_plus, c_minus, h, a_h };
        p.validate()?;
        Ok(p)
    }

    /// Truncated representation of the strictly stable law with the same
    /// Lévy measure: the shift is chosen so that `truncated_cf` coincides
    /// with `strictly_stable_cf`.
    pub fn strictly_stable(alpha: T, c_plus: T, c_minus: T, h: T) -> Result<Self> {
        let mut p = StableParams { alpha, c_plus, c_minus, h, a_h: T::zero() };
        p.validate()?;
        check_alpha_one(alpha, c_plus, c_minus)?;
        p.a_h = -compensation_shift(&p);
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_measure(self.alpha, self.c_plus, self.c_minus)?;
        if !(self.h > T::zero()) || !self.h.is_finite() {
            return invalid(format!("truncation level h must be positive and finite, got {}", self.h));
        }
        if !self.a_h.is_finite() {
            return invalid("shift a_h must be finite");
        }
        Ok(())
    }
}

/// Symmetric law μ_{α,τ}: Lévy measure with c₊ = c₋ = τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetricStableScale<T> {
    pub alpha: T,
    pub tau: T,
}

impl<T: Real> SymmetricStableScale<T> {
    pub fn new(alpha: T, tau: T) -> Result<Self> {
        if !(tau > T::zero()) {
            return invalid(format!("tau must be positive, got {tau}"));
        }
        check_measure(alpha, tau, tau)?;
        Ok(SymmetricStableScale { alpha, tau })
    }

    pub fn cf(&self, theta: T) -> Result<Complex<T>> {
        strictly_stable_cf(theta, self.alpha, self.tau, self.tau)
    }
}

fn check_measure<T: Real>(alpha: T, c_plus: T, c_minus: T) -> Result<()> {
    if !(alpha > T::zero() && alpha < T::lit(2.0)) {
        return invalid(format!("alpha must lie in (0, 2), got {alpha}"));
    }
    if !(c_plus >= T::zero() && c_minus >= T::zero()) || !(c_plus + c_minus > T::zero()) {
        return invalid(format!("need c+ >= 0, c- >= 0, c+ + c- > 0; got ({c_plus}, {c_minus})"));
    }
    if !(c_plus + c_minus).is_finite() {
        return invalid("Lévy constants must be finite");
    }
    Ok(())
}

fn check_alpha_one<T: Real>(alpha: T, c_plus: T, c_minus: T) -> Result<()> {
    if alpha == T::one() && c_plus != c_minus {
        return invalid(format!("alpha = 1 is only supported symmetrically, got c+ = {c_plus}, c- = {c_minus}"));
    }
    Ok(())
}

pub fn levy_density<T: Real>(x: T, p: &StableParams<T>) -> Result<T> {
    if x == T::zero() || x.is_nan() {
        return Err(Error::Domain("the Lévy density is singular at 0".into()));
    }
    let c = if x > T::zero() { p.c_plus } else { p.c_minus };
    Ok(p.alpha * c * x.abs().powf(-p.alpha - T::one()))
}

/// α ∫_{lo}^∞ (e^{iy} − 1 − iy·1{y ≤ cut}) y^{−α−1} dy.
///
/// `cut = 0` drops the compensator, `cut = ∞` compensates everywhere.
pub(crate) fn unit_levy_integral<T: Real>(alpha: T, lo: T, cut: T) -> Result<Complex<T>> {
    let zero = T::zero();
    let one = T::one();
    if lo == zero && cut == zero && alpha >= one {
        return Err(Error::Domain("uncompensated integral diverges at 0 for alpha >= 1".into()));
    }
    if cut.is_infinite() && alpha <= one {
        return Err(Error::Domain("fully compensated integral diverges at infinity for alpha <= 1".into()));
    }
    let i = Complex::new(zero, one);
    let comp_near = lo < cut;
    let y1 = if lo < one {
        if comp_near {
            one.min(cut)
        } else {
            one
        }
    } else {
        lo
    };

    let mut total = Complex::new(zero, zero);
    if y1 > lo {
        let k0 = if comp_near { 2 } else { 1 };
        let mut ik = Complex::new(one, zero);
        let mut fact = one;
        for _ in 1..k0 {
            ik = ik * i;
        }
        for k in 1..k0 {
            fact = fact * T::lit(k as f64);
        }
        let mut k = k0;
        loop {
            let kf = T::lit(k as f64);
            fact = fact * kf;
            ik = ik * i;
            let p = kf - alpha;
            let w = if lo > zero { pow_diff(lo, y1, p) } else { y1.powf(p) / p };
            let term = ik * (w / fact);
            total = total + term;
            if (k > k0 + 2 && term.norm() <= T::epsilon() * T::lit(1e-2) * total.norm().max(T::min_positive_value()))
                || k > 60
            {
                break;
            }
            k += 1;
        }
        total = total * alpha;
    }

    let cut_finite = if cut.is_finite() { cut } else { zero };
    let y_end = y1.max(lo).max(cut_finite).max(one) + T::lit(64.0) * T::PI();
    let mut points = Vec::new();
    let mut y = y1;
    let step = T::PI();
    while y < y_end {
        points.push(y);
        if cut > y && cut < y + step && cut < y_end {
            points.push(cut);
        }
        y = y + step;
    }
    points.push(y_end);
    let neg_exp = -alpha - one;
    let f = |y: T| {
        let e = Complex::new(y.cos() - one, y.sin());
        let e = if y <= cut { e - Complex::new(zero, y) } else { e };
        e * (alpha * y.powf(neg_exp))
    };
    let tol = Tolerance::new(T::lit(1e-13)).with_rel(T::lit(1e-13));
    let tol = Tolerance { max_intervals: points.len() * 8 + 1000, ..tol };
    let mid = integrate(f, &points, tol).require("Lévy integral")?;
    total = total + mid;

    let mut tail = oscillatory_power_tail(alpha + one, y_end) - Complex::new(y_end.powf(-alpha) / alpha, zero);
    if cut.is_infinite() {
        tail = tail - i * (y_end.powf(one - alpha) / (alpha - one));
    }
    Ok(total + tail * alpha)
}

/// ∫_Y^∞ e^{iy} y^{−σ} dy for large Y, by repeated integration by parts.
pub(crate) fn oscillatory_power_tail<T: Real>(sigma: T, y: T) -> Complex<T> {
    let i = Complex::new(T::zero(), T::one());
    let mut sum = Complex::new(T::zero(), T::zero());
    let mut term = Complex::new(y.powf(-sigma), T::zero());
    let mut prev = T::infinity();
    for k in 0..40 {
        let mag = term.norm();
        if mag > prev {
            break;
        }
        sum = sum + term;
        if mag <= T::epsilon() * T::lit(1e-2) * sum.norm() {
            break;
        }
        prev = mag;
        term = term * Complex::new(T::zero(), -(sigma + T::lit(k as f64)) / y);
    }
    -(Complex::new(y.cos(), y.sin()) / i) * sum
}

/// Combines the two sides of the Lévy integral at frequency θ given the unit
/// one-sided value `j` computed for |θ|.
fn two_sided<T: Real>(theta: T, alpha: T, c_plus: T, c_minus: T, j: Complex<T>) -> Complex<T> {
    let s = theta.abs().powf(alpha);
    let (a, b) = if theta > T::zero() { (j, j.conj()) } else { (j.conj(), j) };
    (a * c_plus + b * c_minus) * s
}

/// Exponent of the strictly stable characteristic function.
pub fn strictly_stable_exponent<T: Real>(theta: T, alpha: T, c_plus: T, c_minus: T) -> Result<Complex<T>> {
    check_measure(alpha, c_plus, c_minus)?;
    check_alpha_one(alpha, c_plus, c_minus)?;
    if theta == T::zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let s = theta.abs();
    let cut = if alpha < T::one() {
        T::zero()
    } else if alpha == T::one() {
        s
    } else {
        T::infinity()
    };
    let j = unit_levy_integral(alpha, T::zero(), cut)?;
    Ok(two_sided(theta, alpha, c_plus, c_minus, j))
}

pub fn strictly_stable_cf<T: Real>(theta: T, alpha: T, c_plus: T, c_minus: T) -> Result<Complex<T>> {
    Ok(strictly_stable_exponent(theta, alpha, c_plus, c_minus)?.exp())
}

/// Φ^h(θ) = ∫ (e^{iθx} − 1 − iθx 1{|x| ≤ h}) ν(dx).
pub fn levy_exponent_truncated<T: Real>(theta: T, p: &StableParams<T>) -> Result<Complex<T>> {
    p.validate()?;
    if theta == T::zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let j = unit_levy_integral(p.alpha, T::zero(), p.h * theta.abs())?;
    Ok(two_sided(theta, p.alpha, p.c_plus, p.c_minus, j))
}

pub fn truncated_cf<T: Real>(theta: T, p: &StableParams<T>) -> Result<Complex<T>> {
    let phi = levy_exponent_truncated(theta, p)?;
    Ok((phi + Complex::new(T::zero(), theta * p.a_h)).exp())
}

/// d with Φ^h(θ) = (strict exponent)(θ) + iθd.
fn compensation_shift<T: Real>(p: &StableParams<T>) -> T {
    let a = p.alpha;
    let one = T::one();
    let skew = p.c_plus - p.c_minus;
    if a < one {
        -skew * a * p.h.powf(one - a) / (one - a)
    } else if a > one {
        skew * a * p.h.powf(one - a) / (a - one)
    } else {
        T::zero()
    }
}

/// Chambers–Mallows–Stuck parameters: the law of σ·S_α(β) + shift, where S
/// has characteristic function exp(−|θ|^α (1 − iβ sign(θ) tan(πα/2))) for
/// α ≠ 1 and is standard Cauchy for α = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmsSampler<T> {
    pub alpha: T,
    pub beta: T,
    pub sigma: T,
    pub shift: T,
}

impl<T: Real> CmsSampler<T> {
    /// The strictly stable law with Lévy constants (c₊, c₋):
    /// β = (c₊ − c₋)/(c₊ + c₋), σ^α = (c₊ + c₋)Γ(1−α)cos(πα/2) for α ≠ 1,
    /// and σ = cπ for α = 1 with c₊ = c₋ = c.
    pub fn strictly_stable(alpha: T, c_plus: T, c_minus: T) -> Result<Self> {
        check_measure(alpha, c_plus, c_minus)?;
        check_alpha_one(alpha, c_plus, c_minus)?;
        let total = c_plus + c_minus;
        let (beta, sigma) = if alpha == T::one() {
            (T::zero(), c_plus * T::PI())
        } else {
            let g = (T::one() - alpha).gamma() * (alpha * T::FRAC_PI_2()).cos();
            let sa = total * g;
            if !(sa > T::zero()) || !sa.is_finite() {
                return invalid(format!("scale conversion failed for alpha = {alpha}"));
            }
            ((c_plus - c_minus) / total, sa.powf(T::one() / alpha))
        };
        Ok(CmsSampler { alpha, beta, sigma, shift: T::zero() })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> T {
        let half_pi = T::FRAC_PI_2();
        let v = (T::open_unit(rng) - T::lit(0.5)) * T::PI();
        let x = if self.alpha == T::one() {
            v.tan()
        } else {
            let w = T::std_exp(rng);
            let a = self.alpha;
            let t = self.beta * (a * half_pi).tan();
            let b = t.atan() / a;
            let s = (T::one() + t * t).powf(T::one() / (T::lit(2.0) * a));
            let av = a * (v + b);
            s * av.sin() / v.cos().powf(T::one() / a) * ((v - av).cos() / w).powf((T::one() - a) / a)
        };
        self.sigma * x + self.shift
    }
}

/// Anything `sample_stable` can draw from.
pub trait StableTarget<T: Real> {
    fn sampler(&self) -> Result<CmsSampler<T>>;
}

impl<T: Real> StableTarget<T> for StableParams<T> {
    fn sampler(&self) -> Result<CmsSampler<T>> {
        self.validate()?;
        let mut s = CmsSampler::strictly_stable(self.alpha, self.c_plus, self.c_minus)?;
        s.shift = self.a_h + compensation_shift(self);
        Ok(s)
    }
}

impl<T: Real> StableTarget<T> for SymmetricStableScale<T> {
    fn sampler(&self) -> Result<CmsSampler<T>> {
        CmsSampler::strictly_stable(self.alpha, self.tau, self.tau)
    }
}

/// `n` independent draws, reproducible from `seed`.
pub fn sample_stable<T: Real, P: StableTarget<T>>(p: &P, n: usize, seed: u64) -> Result<Vec<T>> {
    if n == 0 {
        return invalid("sample size must be at least 1");
    }
    let s = p.sampler()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| s.sample(&mut rng)).collect())
}
