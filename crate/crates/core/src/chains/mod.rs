//! Markov kernels and trajectory simulation.

mod ar1;
mod arch;
mod countable;
mod iid;
mod skeleton;

pub use ar1::{ar1_density, ar1_step, Ar1Kernel, Ar1Spec};
pub use arch::{
    arch_kappa, arch_log_moment, arch_s_infinity, arch_step, arch_tail_constant_empirical, arch_tail_constant_goldie,
    arch_tau, ArchSpec, TauEstimate, ARCH_BURN_IN,
};
pub use countable::{
    backward_recurrence_kernel, BackwardRecurrenceSpec, CountableKernel, TableObservable, MAX_MASS_DEFICIT,
};
pub use iid::{iid_kernel, IidKernel};
pub use skeleton::{skeleton_step, SkeletonKernel, SkeletonObservable, SkeletonSpec, SkeletonState};

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::scalar::Real;
use crate::tails::{Observable, ObservableSpec};

pub trait MarkovKernel<T: Real>: Send + Sync {
    type State: Copy + Send + Sync + Debug + PartialEq;

    /// A draw from the stationary law (or its documented approximation).
    fn initial<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Self::State>;

    fn step<R: Rng + ?Sized>(&self, x: Self::State, rng: &mut R) -> Self::State;
}

/// A real-valued function of the state.
pub trait Observe<S, T>: Send + Sync {
    fn psi(&self, s: &S) -> T;
}

impl<T: Real> Observe<T, T> for Observable<T> {
    #[inline]
    fn psi(&self, s: &T) -> T {
        self.eval(*s)
    }
}

impl<T: Real> Observe<T, T> for ObservableSpec<T> {
    #[inline]
    fn psi(&self, s: &T) -> T {
        self.psi.eval(*s)
    }
}

/// RNG for one replicate: the stream index selects an independent ChaCha
/// stream under the master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S, T> {
    pub seed: u64,
    pub stream: u64,
    /// X_0, …, X_n.
    pub states: Vec<S>,
    pub psi: Option<Vec<T>>,
}

impl<S, T> Trajectory<S, T> {
    pub fn len(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A stationary path of `n` steps, reproducible from `(seed, stream)`.
pub fn simulate_trajectory<T, K, O>(
    kernel: &K,
    n: usize,
    seed: u64,
    stream: u64,
    obs: Option<&O>,
) -> Result<Trajectory<K::State, T>>
where
    T: Real,
    K: MarkovKernel<T>,
    O: Observe<K::State, T>,
{
    let mut rng = stream_rng(seed, stream);
    let mut states = Vec::with_capacity(n + 1);
    let mut x = kernel.initial(&mut rng)?;
    states.push(x);
    for _ in 0..n {
        x = kernel.step(x, &mut rng);
        states.push(x);
    }
    let psi = obs.map(|o| states.iter().map(|s| o.psi(s)).collect());
    Ok(Trajectory { seed, stream, states, psi })
}
