use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MarkovKernel;
use crate::error::{invalid, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Spec<T> {
    pub rho: T,
}

impl<T: Real> Ar1Spec<T> {
    pub fn new(rho: T) -> Result<Self> {
        if !(rho.abs() > T::zero() && rho.abs() < T::one()) {
            return invalid(format!("AR(1) needs 0 < |rho| < 1, got {rho}"));
        }
        Ok(Ar1Spec { rho })
    }
}

#[inline]
pub fn ar1_step<T: Real>(spec: &Ar1Spec<T>, x: T, noise: T) -> T {
    spec.rho * x + (T::one() - spec.rho * spec.rho).sqrt() * noise
}

/// p(x, y) with P(x, dy) = p(x, y) π(dy), π standard normal.
pub fn ar1_density<T: Real>(spec: &Ar1Spec<T>, x: T, y: T) -> T {
    let r = spec.rho;
    let v = T::one() - r * r;
    let two = T::lit(2.0);
    let e = -(r * r * x * x) / (two * v) + r * x * y / v - r * r * y * y / (two * v);
    e.exp() / v.sqrt()
}

/// Gaussian AR(1) with standard normal stationary law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Kernel<T> {
    pub spec: Ar1Spec<T>,
    /// √(1 − ρ²).
    pub sd: T,
}

impl<T: Real> Ar1Kernel<T> {
    pub fn new(spec: Ar1Spec<T>) -> Result<Self> {
        let spec = Ar1Spec::new(spec.rho)?;
        Ok(Ar1Kernel { spec, sd: (T::one() - spec.rho * spec.rho).sqrt() })
    }

    pub fn rho(&self) -> T {
        self.spec.rho
    }
}

impl<T: Real> MarkovKernel<T> for Ar1Kernel<T> {
    type State = T;

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<T> {
        Ok(T::std_normal(rng))
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, x: T, rng: &mut R) -> T {
        self.spec.rho * x + self.sd * T::std_normal(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, Tolerance};
    use crate::scalar::normal_pdf;

    #[test]
    fn density_integrates_to_one() {
        let spec = Ar1Spec::new(0.5f64).unwrap();
        for &x in &[0.0, 1.0, -1.0, 3.0, -3.0] {
            let q = integrate(
                |y| ar1_density(&spec, x, y) * normal_pdf(y),
                &[-15.0, -5.0, 0.0, 5.0, 15.0],
                Tolerance::new(1e-12),
            );
            assert!((q.value - 1.0).abs() < 1e-8, "x={x}: {}", q.value);
        }
        assert!((ar1_density(&spec, 0.0, 0.0) - 1.0 / 0.75f64.sqrt()).abs() < 1e-15);
        assert_eq!(ar1_density(&spec, 0.3, -1.2), ar1_density(&spec, -1.2, 0.3));
    }

    #[test]
    fn step_formula() {
        let spec = Ar1Spec::new(-0.3f64).unwrap();
        assert_eq!(ar1_step(&spec, 2.0, 0.0), -0.6);
        assert!(Ar1Spec::new(1.0f64).is_err());
        assert!(Ar1Spec::new(0.0f64).is_err());
    }
}
