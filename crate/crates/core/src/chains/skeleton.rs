use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MarkovKernel, Observe};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::tails::{ImageLaw, TailModel};

/// Point x = segment + offset of [0, 3); segments are [0,1), [1,2), [2,3).
///
/// Keeping the offset separate makes Ψ(x) + Ψ(x + 1) = 0 hold exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkeletonState<T> {
    pub segment: u8,
    pub offset: T,
}

impl<T: Real> SkeletonState<T> {
    pub fn from_point(x: T) -> Result<Self> {
        if !(x >= T::zero() && x < T::lit(3.0)) {
            return Err(Error::Domain(format!("skeleton state must lie in [0, 3), got {x}")));
        }
        let seg = x.floor();
        Ok(SkeletonState { segment: seg.to_u8().unwrap_or(0), offset: x - seg })
    }

    pub fn point(&self) -> T {
        T::lit(self.segment as f64) + self.offset
    }
}

/// Next state from x given a uniform draw u (used only on [2, 3)).
pub fn skeleton_step<T: Real>(x: T, u: T) -> Result<T> {
    let s = SkeletonState::from_point(x)?;
    Ok(step_state(s, u).point())
}

#[inline]
fn step_state<T: Real>(s: SkeletonState<T>, u: T) -> SkeletonState<T> {
    let half = T::lit(0.5);
    match s.segment {
        0 | 1 => SkeletonState { segment: s.segment + 1, offset: s.offset },
        _ => {
            if u < half {
                SkeletonState { segment: 0, offset: u + u }
            } else {
                SkeletonState { segment: 2, offset: (u - half) + (u - half) }
            }
        }
    }
}

/// The chain on [0, 3) with P(x, {x+1}) = 1 on [0, 2) and P(x, ·) = Leb/2
/// on [0,1) ∪ [2,3) from [2, 3); ψ maps [0, 1) onto a symmetric image law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SkeletonSpec<T> {
    pub psi: ImageLaw<T>,
}

impl<T: Real> SkeletonSpec<T> {
    pub fn new(psi: ImageLaw<T>) -> Result<Self> {
        let (cp, cm) = psi.tail_constants();
        if cp != cm {
            return invalid("skeleton image law must be symmetric");
        }
        if let ImageLaw::Pareto(p) = psi {
            if p.c_plus != p.c_minus {
                return invalid("skeleton image law must be symmetric");
            }
        }
        Ok(SkeletonSpec { psi })
    }

    pub fn alpha(&self) -> T {
        self.psi.alpha()
    }

    pub fn observable(&self) -> SkeletonObservable<T> {
        SkeletonObservable { law: self.psi }
    }

    /// Tail of Ψ under the invariant law: Ψ ≠ 0 only on [0, 2), which
    /// carries mass 1/2, so each balance constant is half that of ψ.
    pub fn tail_model(&self) -> Result<TailModel<T>> {
        let (c, _) = self.psi.tail_constants();
        let h = c * T::lit(0.5);
        TailModel::pareto(self.alpha(), h, h)
    }
}

pub type SkeletonKernel<T> = SkeletonSpec<T>;

impl<T: Real> MarkovKernel<T> for SkeletonSpec<T> {
    type State = SkeletonState<T>;

    /// Invariant density ¼ on [0, 2) and ½ on [2, 3).
    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self::State> {
        let v = T::open_unit(rng);
        let q = T::lit(0.25);
        let segment = if v < q {
            0
        } else if v < q + q {
            1
        } else {
            2
        };
        Ok(SkeletonState { segment, offset: T::open_unit(rng) })
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, s: Self::State, rng: &mut R) -> Self::State {
        if s.segment < 2 {
            step_state(s, T::zero())
        } else {
            step_state(s, T::open_unit(rng))
        }
    }
}

/// Ψ = ψ on [0,1), −ψ(· − 1) on [1,2), 0 on [2,3).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonObservable<T> {
    pub law: ImageLaw<T>,
}

impl<T: Real> SkeletonObservable<T> {
    #[inline]
    pub fn psi_base(&self, u: T) -> T {
        self.law.quantile_split(u, T::one() - u)
    }
}

impl<T: Real> Observe<SkeletonState<T>, T> for SkeletonObservable<T> {
    #[inline]
    fn psi(&self, s: &SkeletonState<T>) -> T {
        match s.segment {
            0 => self.psi_base(s.offset),
            1 => -self.psi_base(s.offset),
            _ => T::zero(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_branches() {
        assert!((skeleton_step(0.4f64, 0.9).unwrap() - 1.4).abs() < 1e-15);
        assert!((skeleton_step(1.4f64, 0.9).unwrap() - 2.4).abs() < 1e-15);
        assert!((skeleton_step(2.4f64, 0.2).unwrap() - 0.4).abs() < 1e-15);
        assert!((skeleton_step(2.4f64, 0.7).unwrap() - 2.4).abs() < 1e-12);
        assert!(skeleton_step(3.0f64, 0.1).is_err());
        assert!(skeleton_step(-0.1f64, 0.1).is_err());
    }

    #[test]
    fn antisymmetry_exact() {
        let spec = SkeletonSpec::new(ImageLaw::Cauchy { scale: 1.0f64 }).unwrap();
        let obs = spec.observable();
        for &u in &[0.01, 0.3, 0.5, 0.77, 0.999] {
            let a = obs.psi(&SkeletonState { segment: 0, offset: u });
            let b = obs.psi(&SkeletonState { segment: 1, offset: u });
            assert_eq!(a + b, 0.0);
        }
    }
}
