//! Interacting Wasserstein gradient flows for robust Bayesian inference.
//!
//! This crate evolves two coupled particle ensembles: an approximation to a
//! posterior distribution and a prior constrained to a 2-Wasserstein ambiguity
//! set around a nominal prior. Running the flow in `Optimal` mode pulls the
//! prior towards regions of high posterior density; `WorstCase` mode pushes it
//! away. Both stay within the prescribed Wasserstein radius.
//!
//! The building blocks are exposed as standalone modules:
//!
//! - [`ensemble`]: particle containers, Gaussian kernels, and kernel density
//!   score estimation (the `∇log ρ` surrogate).
//! - [`transport`]: exact 2-Wasserstein distance between equal-size uniform
//!   empirical measures and ambiguity-set membership.
//! - [`gradients`]: Gaussian likelihood and the ensemble estimator of the
//!   log-likelihood gradient.
//! - [`surrogate`]: Gaussian-process surrogate of the likelihood potential
//!   with an analytic mean gradient, for expensive forward models.
//! - [`ratio`]: direct density-ratio estimation between the two ensembles.
//! - [`models`]: the bundled forward models, including a coupled-beam
//!   finite-element modal model.
//! - [`flow`]: the interacting flow engine: phases, step halving, resets,
//!   and stopping criteria.
//!
//! The crate is `no_std` compatible (with `alloc`); all floating-point math
//! goes through `libm` so results do not depend on the `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ensemble;
pub mod error;
pub mod flow;
pub mod gradients;
pub mod linalg;
pub mod models;
pub mod ratio;
pub mod rng;
pub mod surrogate;
pub mod transport;

pub use error::{Error, Result};

pub(crate) mod math {
    //! Thin wrappers so core code never calls `std` float intrinsics.

    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }

    #[inline]
    pub fn hypot(x: f64, y: f64) -> f64 {
        libm::hypot(x, y)
    }

    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
}
