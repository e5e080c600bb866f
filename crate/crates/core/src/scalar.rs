//! Floating-point abstraction shared by the numerical core.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Scalar type used by every generic routine in the crate.
///
/// Special functions and random variates are evaluated in `f64` and rounded,
/// which is exact for `f64` and adequate for `f32`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest absolute tolerance quadrature routines should be asked for.
    fn tol_floor() -> Self {
        Self::lit(1e3) * Self::epsilon()
    }

    fn ln_gamma(self) -> Self {
        Self::lit(statrs::function::gamma::ln_gamma(self.as_f64()))
    }

    fn gamma(self) -> Self {
        Self::lit(statrs::function::gamma::gamma(self.as_f64()))
    }

    fn digamma(self) -> Self {
        Self::lit(statrs::function::gamma::digamma(self.as_f64()))
    }

    fn erfc(self) -> Self {
        Self::lit(statrs::function::erf::erfc(self.as_f64()))
    }

    fn erfc_inv(self) -> Self {
        Self::lit(statrs::function::erf::erfc_inv(self.as_f64()))
    }

    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let z: f64 = StandardNormal.sample(rng);
        Self::lit(z)
    }

    /// Uniform on the open interval (0, 1).
    fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                return Self::lit(u);
            }
        }
    }

    fn std_exp<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let e: f64 = Exp1.sample(rng);
        Self::lit(e)
    }
}

impl Real for f64 {
    fn lit(x: f64) -> Self {
        x
    }
}

impl Real for f32 {
    fn lit(x: f64) -> Self {
        x as f32
    }
}

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Standard normal survival function Φ̄(z).
pub fn normal_sf<T: Real>(z: T) -> T {
    (z / T::SQRT_2()).erfc() * T::lit(0.5)
}

/// Standard normal distribution function Φ(z).
pub fn normal_cdf<T: Real>(z: T) -> T {
    normal_sf(-z)
}

/// Standard normal density.
pub fn normal_pdf<T: Real>(z: T) -> T {
    (-(z * z) * T::lit(0.5)).exp() / (T::TAU()).sqrt()
}

/// Solves Φ̄(z) = p for p in (0, 1).
pub fn normal_isf<T: Real>(p: T) -> T {
    (p * T::lit(2.0)).erfc_inv() * T::SQRT_2()
}

/// (b^p − a^p)/p for 0 < a ≤ b, with the p → 0 limit ln(b/a).
pub fn pow_diff<T: Real>(a: T, b: T, p: T) -> T {
    let l = (b / a).ln();
    if p == T::zero() {
        return l;
    }
    a.powf(p) * (p * l).exp_m1() / p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_helpers_round_trip() {
        for &p in &[1e-12, 1e-4, 0.1, 0.5, 0.9] {
            let z: f64 = normal_isf(p);
            assert!((normal_sf(z) / p - 1.0).abs() < 1e-10);
        }
        assert!((normal_cdf(0.0f64) - 0.5).abs() < 1e-15);
        assert!((normal_pdf(0.0f64) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn pow_diff_limits() {
        let v: f64 = pow_diff(2.0, 5.0, 0.0);
        assert!((v - 2.5f64.ln()).abs() < 1e-15);
        let w: f64 = pow_diff(2.0, 5.0, 1e-9);
        assert!((w - 2.5f64.ln()).abs() < 1e-8);
        let u: f64 = pow_diff(2.0, 5.0, -0.5);
        assert!((u - (5f64.powf(-0.5) - 2f64.powf(-0.5)) / -0.5).abs() < 1e-14);
    }

    #[test]
    fn f32_special_functions() {
        assert!((Real::ln_gamma(0.5f32) - 0.572_364_9).abs() < 1e-6);
        assert!((Real::erfc(0.0f32) - 1.0).abs() < 1e-7);
    }
}
