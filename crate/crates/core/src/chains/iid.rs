use rand::Rng;

use super::MarkovKernel;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tails::Marginal;

/// P(x, ·) = π for every x.
#[derive(Debug, Clone, PartialEq)]
pub struct IidKernel<T> {
    pub marginal: Marginal<T>,
}

pub fn iid_kernel<T: Real>(marginal: Marginal<T>) -> Result<IidKernel<T>> {
    if let Marginal::Uniform { lo, hi } = &marginal {
        if !(hi > lo) {
            return Err(Error::InvalidParameter("uniform marginal needs lo < hi".into()));
        }
    }
    Ok(IidKernel { marginal })
}

impl<T: Real> MarkovKernel<T> for IidKernel<T> {
    type State = T;

    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<T> {
        Ok(self.marginal.sample(rng))
    }

    #[inline]
    fn step<R: Rng + ?Sized>(&self, _x: T, rng: &mut R) -> T {
        self.marginal.sample(rng)
    }
}
