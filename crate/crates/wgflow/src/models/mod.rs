//! Forward models: the 1-DOF mass-spring system, the logarithmic Rosenbrock
//! map with its double-banana posterior, and the coupled-beam finite-element
//! modal model.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Prng;

pub mod beam;

pub use beam::{
    beam_assemble, beam_frequencies, resolve_configuration, BeamSpec, BoundaryCondition,
    CandidateScore, DoubleBeamModel, FixtureModel, ModalResult,
};

/// A deterministic map from a parameter vector to model outputs.
pub trait ForwardModel {
    fn dimension(&self) -> usize;
    fn output_size(&self) -> usize;
    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>>;
    /// Whether concurrent evaluations are safe. All bundled models are pure.
    fn concurrency_safe(&self) -> bool {
        true
    }
}

/// Angular frequency `√(k/m)` of a unit-mass spring with stiffness `θ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MassSpringModel;

/// `ω = √θ` in rad/s; `θ` must be positive.
pub fn mass_spring_forward(theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::Domain("mass-spring stiffness must be positive"));
    }
    Ok(crate::math::sqrt(theta))
}

impl ForwardModel for MassSpringModel {
    fn dimension(&self) -> usize {
        1
    }

    fn output_size(&self) -> usize {
        1
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: theta.len(),
            });
        }
        Ok(alloc::vec![mass_spring_forward(theta[0])?])
    }
}

/// Logarithmic Rosenbrock map whose Gaussian posterior takes the
/// double-banana shape.
#[derive(Debug, Clone, Copy, Default)]
pub struct DoubleBananaModel;

/// `log((1-θ₁)² + 100(θ₂-θ₁²)²)`; the curve point `(1, 1)` where the
/// argument vanishes is a singularity.
pub fn double_banana_forward(theta: &[f64]) -> Result<f64> {
    if theta.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: theta.len(),
        });
    }
    let a = 1.0 - theta[0];
    let b = theta[1] - theta[0] * theta[0];
    let arg = a * a + 100.0 * b * b;
    if arg == 0.0 {
        return Err(Error::Singularity("log argument vanished at (1, 1)"));
    }
    Ok(crate::math::ln(arg))
}

impl ForwardModel for DoubleBananaModel {
    fn dimension(&self) -> usize {
        2
    }

    fn output_size(&self) -> usize {
        1
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(alloc::vec![double_banana_forward(theta)?])
    }
}

/// Synthesises an observation `PM(θ_true) + ζ` with independent Gaussian
/// noise of the given per-output standard deviations; deterministic per seed.
pub fn synthesize_observation(
    model: &dyn ForwardModel,
    theta_true: &[f64],
    noise_sigma: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    if noise_sigma.len() != model.output_size() {
        return Err(Error::DimensionMismatch {
            expected: model.output_size(),
            found: noise_sigma.len(),
        });
    }
    if noise_sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidInput(
            "noise standard deviations must be nonnegative".into(),
        ));
    }
    let mut y = model.evaluate(theta_true)?;
    let mut rng = Prng::seed_from(seed);
    for (value, sigma) in y.iter_mut().zip(noise_sigma.iter()) {
        *value += sigma * rng.next_standard_normal();
    }
    Ok(y)
}
