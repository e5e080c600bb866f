//! Stable limit theorems for additive functionals of Markov chains: stable
//! laws, tail models, example chains, transition-operator diagnostics,
//! principle-of-conditioning computations and a Monte Carlo harness.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`.

pub mod chains;
pub mod conditional;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod poc;
pub mod quadrature;
pub mod roots;
pub mod scalar;
pub mod stable;
pub mod tails;

pub use error::{Error, Result};
pub use scalar::Real;

pub type StableParams = stable::StableParams<f64>;
pub type SymmetricStableScale = stable::SymmetricStableScale<f64>;
pub type CmsSampler = stable::CmsSampler<f64>;
pub type TailModel = tails::TailModel<f64>;
pub type TwoSidedPareto = tails::TwoSidedPareto<f64>;
pub type ImageLaw = tails::ImageLaw<f64>;
pub type Marginal = tails::Marginal<f64>;
pub type Observable = tails::Observable<f64>;
pub type ObservableSpec = tails::ObservableSpec<f64>;
pub type Ar1Kernel = chains::Ar1Kernel<f64>;
pub type ArchSpec = chains::ArchSpec<f64>;
pub type CountableKernel = chains::CountableKernel<f64>;
pub type BackwardRecurrenceSpec = chains::BackwardRecurrenceSpec<f64>;
pub type IidKernel = chains::IidKernel<f64>;
pub type SkeletonSpec = chains::SkeletonSpec<f64>;
pub type Ar1Conditional = conditional::Ar1Conditional<f64>;
pub type PocRun = poc::PocRun<f64>;
