//! The interacting particle-flow engine.
//!
//! Two ensembles evolve together. The posterior approximation follows the
//! deterministic descent
//! `θ' = θ + α (∇log p̃(θ) + ∇log p(y|θ) - ∇log ρ̃(θ))`, with both scores
//! estimated by KDE over the prior and posterior ensembles. The prior follows
//! `θ' = θ ± τ g(θ) (∇log p̃(θ) - ∇log ρ̃(θ))` with `g` the estimated density
//! ratio between the ensembles; the sign selects the optimal (`+`) or
//! worst-case (`-`) prior.
//!
//! A run has three phases. Warm-up holds the prior still (`τ = 0`) for `Na`
//! iterations so the posterior approximation can settle. The interacting
//! phase then proposes a prior step each iteration and keeps it only if the
//! updated ensemble stays inside the ambiguity set; a rejected proposal
//! shrinks `τ` by the halving factor and retries. Rejections accumulate in a
//! discard counter; at `Nb` the prior is reset to its snapshot from `Nc`
//! iterations back, `τ` is restored, and a reset is tallied. After `Nreset`
//! resets a final cool-down of `Na` iterations runs with `τ = 0` again.

use alloc::format;
use alloc::vec::Vec;

use crate::ensemble::{self, EnsembleRole, KernelConfig, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::gradients::{ensemble_jacobian, loglik_gradient, GaussianLikelihood};
use crate::linalg::Mat;
use crate::models::ForwardModel;
use crate::ratio::{fit_density_ratio, KdeRatioModel, RatioModel, RatioSettings};
use crate::rng::Prng;
use crate::surrogate::{gp_fit, gp_mean_gradient, potential, HyperPolicy};
use crate::transport::{w2_distance, within_ambiguity, AmbiguitySet};

/// Which prior the interacting phase drives towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    Optimal,
    WorstCase,
}

impl FlowMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowMode::Optimal => "optimal",
            FlowMode::WorstCase => "worst_case",
        }
    }
}

/// How the log-likelihood gradient at the posterior particles is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientProviderKind {
    /// Relative-difference Jacobian over the ensemble.
    EnsembleJacobian,
    /// GP surrogate of the misfit potential, refitted each iteration on the
    /// current particles.
    GpSurrogate,
}

/// How the density ratio between the ensembles is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioEstimatorKind {
    Rulsif,
    KdeRatio,
}

/// Lifetime of the discard counter that triggers resets.
///
/// With the per-iteration scope a reset needs `Nb` failed proposals within a
/// single iteration, which only happens when the prior is pinned hard against
/// the ambiguity boundary; the persistent `τ` halving then freezes the prior
/// at the radius and runs go the full iteration budget. Accumulating across
/// iterations instead trips the reset almost immediately after first boundary
/// contact and truncates the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscardCounterScope {
    PerIteration,
    Run,
}

/// Step sizes, counters, and strategy switches for one run.
#[derive(Debug, Clone)]
pub struct FlowConfig {
    /// Posterior step size.
    pub alpha: f64,
    /// Prior step size (subject to halving).
    pub tau: f64,
    /// Initial particle count, shared by both ensembles.
    pub n0: usize,
    /// Warm-up and cool-down iteration count.
    pub na: usize,
    /// Discards that trigger a reset.
    pub nb: usize,
    /// Reset look-back in iterations.
    pub nc: usize,
    /// Resets before the final cool-down.
    pub n_reset: usize,
    /// Hard iteration cap.
    pub n_max: usize,
    pub mode: FlowMode,
    /// Multiplies `τ` after each discarded proposal; in (0, 1).
    pub halving_factor: f64,
    /// Floor under which an iteration gives up proposing and keeps the
    /// previous prior (tallied as a discard).
    pub min_tau: f64,
    pub gradient_provider: GradientProviderKind,
    pub ratio_estimator: RatioEstimatorKind,
    pub ratio_settings: RatioSettings,
    pub discard_scope: DiscardCounterScope,
    /// Reproduce the halved likelihood-gradient variant.
    pub halved_likelihood_gradient: bool,
    /// Restore `τ` to its configured value after a reset (the alternative
    /// keeps the collapsed value).
    pub restore_tau_on_reset: bool,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            alpha: 3e-3,
            tau: 3e-4,
            n0: 100,
            na: 50,
            nb: 5,
            nc: 10,
            n_reset: 2,
            n_max: 400,
            mode: FlowMode::Optimal,
            halving_factor: 0.5,
            min_tau: 1e-12,
            gradient_provider: GradientProviderKind::EnsembleJacobian,
            ratio_estimator: RatioEstimatorKind::Rulsif,
            ratio_settings: RatioSettings::default(),
            discard_scope: DiscardCounterScope::PerIteration,
            halved_likelihood_gradient: false,
            restore_tau_on_reset: true,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidInput(format!(
                "tau must be nonnegative, got {}",
                self.tau
            )));
        }
        if self.n0 == 0 || self.na == 0 || self.nb == 0 || self.nc == 0 || self.n_max == 0 {
            return Err(Error::InvalidInput(
                "n0, na, nb, nc, and n_max must all be at least 1".into(),
            ));
        }
        if !(self.halving_factor > 0.0 && self.halving_factor < 1.0) {
            return Err(Error::InvalidInput(format!(
                "halving factor must lie in (0, 1), got {}",
                self.halving_factor
            )));
        }
        if !(self.min_tau > 0.0) {
            return Err(Error::InvalidInput("min_tau must be positive".into()));
        }
        Ok(())
    }
}

/// Control events recorded against the iteration they occurred in.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowEvent {
    PhaseChange {
        phase: u8,
    },
    /// A proposal landed outside the ambiguity set at this distance.
    Discarded {
        distance: f64,
    },
    /// `τ` was halved to this value after a discard.
    Halved {
        tau: f64,
    },
    /// `τ` fell below the floor; the previous prior was kept.
    TauFloor,
    /// The prior was reset to its snapshot from the given iteration.
    Reset {
        restored_from: usize,
    },
}

/// The state entering an iteration, its diagnostics, and what the iteration
/// then did.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub index: usize,
    pub posterior: ParticleEnsemble,
    pub prior: ParticleEnsemble,
    /// `τ` that produced the accepted prior update (0 when the prior was held).
    pub tau_used: f64,
    pub alpha_used: f64,
    pub w2_nominal_prior: f64,
    pub w2_nominal_posterior: f64,
    pub w2_posterior_prior: f64,
    /// Monte Carlo estimate of the objective functional (diagnostic only).
    pub functional: f64,
    pub events: Vec<FlowEvent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    MaxIterations,
    ResetsExhaustedPlusCooldown,
    /// The run aborted; only partial traces carry this.
    Aborted,
}

impl TerminalReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            TerminalReason::MaxIterations => "max_iterations",
            TerminalReason::ResetsExhaustedPlusCooldown => "resets_exhausted_plus_cooldown",
            TerminalReason::Aborted => "aborted",
        }
    }
}

/// Complete run history.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    /// The nominal ensemble the ambiguity set was anchored to.
    pub nominal: ParticleEnsemble,
    pub records: Vec<IterationRecord>,
    pub terminal: TerminalReason,
}

/// A failed run: the root cause, the particle that broke (for model
/// failures), and whatever trace had accumulated.
#[derive(Debug, Clone)]
pub struct FlowFailure {
    pub error: Error,
    pub failing_particle: Option<(usize, usize)>,
    pub partial: FlowTrace,
}

/// Where the initial/nominal particles come from.
#[derive(Debug, Clone)]
pub enum NominalPrior {
    Gaussian { mean: Vec<f64>, covariance: Mat },
    Particles(ParticleEnsemble),
}

fn positions_mat(e: &ParticleEnsemble) -> Mat {
    Mat::from_rows(e.len(), e.dim(), e.positions())
}

fn ensure_finite(positions: &[f64]) -> Result<()> {
    if positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::Divergence { iteration: 0 });
    }
    Ok(())
}

/// One posterior descent step
/// `θ' = θ + α (∇log p̃(θ) + ∇log p(y|θ) - ∇log ρ̃(θ))`.
///
/// The prior score is KDE over `prior` with `prior_kernel`; the posterior
/// score is KDE over `posterior` itself with `posterior_kernel`. `α = 0`
/// returns the input unchanged. A divergence error from this function carries
/// iteration 0; the driver rewrites it.
pub fn posterior_step(
    posterior: &ParticleEnsemble,
    prior: &ParticleEnsemble,
    loglik_grads: &Mat,
    alpha: f64,
    prior_kernel: &KernelConfig,
    posterior_kernel: &KernelConfig,
) -> Result<ParticleEnsemble> {
    if alpha == 0.0 {
        return Ok(posterior.clone());
    }
    let n = posterior.len();
    let d = posterior.dim();
    if loglik_grads.rows() != n || loglik_grads.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            found: loglik_grads.rows() * loglik_grads.cols(),
        });
    }
    let eval = positions_mat(posterior);
    let prior_score = ensemble::kde_score(&eval, prior, prior_kernel)?;
    let posterior_score = ensemble::kde_score(&eval, posterior, posterior_kernel)?;
    let mut updated = Vec::with_capacity(n * d);
    for i in 0..n {
        let theta = posterior.particle(i);
        for k in 0..d {
            let velocity = prior_score[(i, k)] + loglik_grads[(i, k)] - posterior_score[(i, k)];
            updated.push(theta[k] + alpha * velocity);
        }
    }
    ensure_finite(&updated)?;
    ParticleEnsemble::new(updated, n, d, posterior.role())
}

/// One prior step `θ' = θ ± τ g(θ) (∇log ρ̃(θ) - ∇log p̃(θ))`, evaluated at
/// the prior particles; the sign flips in worst-case mode. `τ = 0` returns
/// the input unchanged (the static-prior flow).
///
/// The optimal-mode field is `∇(ρ/p)`, the steepest descent of the
/// cross-entropy term over the prior, which pulls prior mass towards
/// regions of high posterior density; worst-case mode is its exact negation.
pub fn prior_step(
    prior: &ParticleEnsemble,
    posterior: &ParticleEnsemble,
    tau: f64,
    mode: FlowMode,
    ratio_model: &RatioModel,
    prior_kernel: &KernelConfig,
    posterior_kernel: &KernelConfig,
) -> Result<ParticleEnsemble> {
    if tau == 0.0 {
        return Ok(prior.clone());
    }
    let n = prior.len();
    let d = prior.dim();
    let eval = positions_mat(prior);
    let g = ratio_model.evaluate(&eval)?;
    let prior_score = ensemble::kde_score(&eval, prior, prior_kernel)?;
    let posterior_score = ensemble::kde_score(&eval, posterior, posterior_kernel)?;
    let sign = match mode {
        FlowMode::Optimal => 1.0,
        FlowMode::WorstCase => -1.0,
    };
    let mut updated = Vec::with_capacity(n * d);
    for i in 0..n {
        let theta = prior.particle(i);
        for k in 0..d {
            let velocity = g[i] * (posterior_score[(i, k)] - prior_score[(i, k)]);
            updated.push(theta[k] + sign * tau * velocity);
        }
    }
    ensure_finite(&updated)?;
    ParticleEnsemble::new(updated, n, d, prior.role())
}

/// Monte Carlo estimate of the objective functional over the posterior
/// particles: `mean[log ρ̃(θ) - log p̃(θ) - log p(y|θ)]`. KDE floors apply, so
/// this never fails on far-field points; it is a diagnostic, not a control
/// signal.
pub fn functional_estimate(
    posterior: &ParticleEnsemble,
    prior: &ParticleEnsemble,
    loglik_values: &[f64],
    prior_kernel: &KernelConfig,
    posterior_kernel: &KernelConfig,
) -> Result<f64> {
    let n = posterior.len();
    if loglik_values.len() != n {
        return Err(Error::SizeMismatch {
            expected: n,
            found: loglik_values.len(),
        });
    }
    let eval = positions_mat(posterior);
    let rho_kernel = KernelConfig::normalized(posterior_kernel.bandwidth)?;
    let p_kernel = KernelConfig::normalized(prior_kernel.bandwidth)?;
    let log_rho = ensemble::kde_log_density(&eval, posterior, &rho_kernel)?;
    let log_p = ensemble::kde_log_density(&eval, prior, &p_kernel)?;
    let mut acc = 0.0;
    for i in 0..n {
        acc += log_rho[i] - log_p[i] - loglik_values[i];
    }
    Ok(acc / n as f64)
}

struct GradientOutputs {
    loglik_values: Vec<f64>,
    loglik_grads: Mat,
}

fn evaluate_gradients(
    config: &FlowConfig,
    model: &dyn ForwardModel,
    lik: &GaussianLikelihood,
    posterior: &ParticleEnsemble,
    iteration: usize,
) -> core::result::Result<GradientOutputs, (Error, Option<(usize, usize)>)> {
    let n = posterior.len();
    let n_obs = model.output_size();
    let mut outputs = Mat::zeros(n, n_obs);
    for r in 0..n {
        let y = model
            .evaluate(posterior.particle(r))
            .map_err(|e| (e, Some((iteration, r))))?;
        if y.len() != n_obs {
            return Err((
                Error::DimensionMismatch {
                    expected: n_obs,
                    found: y.len(),
                },
                Some((iteration, r)),
            ));
        }
        outputs.row_mut(r).copy_from_slice(&y);
    }
    let mut loglik_values = Vec::with_capacity(n);
    for r in 0..n {
        loglik_values.push(lik.log_likelihood(outputs.row(r)).map_err(|e| (e, None))?);
    }
    let loglik_grads = match config.gradient_provider {
        GradientProviderKind::EnsembleJacobian => {
            let jac = ensemble_jacobian(posterior, &outputs).map_err(|e| (e, None))?;
            loglik_gradient(lik, &jac, &outputs, config.halved_likelihood_gradient)
                .map_err(|e| (e, None))?
        }
        GradientProviderKind::GpSurrogate => {
            let mut potentials = Vec::with_capacity(n);
            for r in 0..n {
                potentials.push(potential(lik, outputs.row(r)).map_err(|e| (e, None))?);
            }
            let inputs = positions_mat(posterior);
            let surrogate =
                gp_fit(&inputs, &potentials, HyperPolicy::Heuristic).map_err(|e| (e, None))?;
            let mut grads = gp_mean_gradient(&surrogate, &inputs).map_err(|e| (e, None))?;
            // ∇log p(y|θ) = -∇V_L up to θ-independent terms.
            for i in 0..grads.rows() {
                for value in grads.row_mut(i).iter_mut() {
                    *value = -*value;
                }
            }
            grads
        }
    };
    Ok(GradientOutputs {
        loglik_values,
        loglik_grads,
    })
}

fn fail_with(
    error: Error,
    failing_particle: Option<(usize, usize)>,
    nominal: &ParticleEnsemble,
    records: &mut Vec<IterationRecord>,
) -> FlowFailure {
    FlowFailure {
        error,
        failing_particle,
        partial: FlowTrace {
            nominal: nominal.clone(),
            records: core::mem::take(records),
            terminal: TerminalReason::Aborted,
        },
    }
}

/// Runs the full three-phase interacting flow.
///
/// All randomness flows from one generator seeded with `config.seed`, in a
/// fixed order: the initial particle draws first (when the nominal prior is
/// parametric), then any per-iteration ratio-center subsampling. Traces are
/// therefore bit-reproducible for a fixed seed on one platform and build.
pub fn run_flow(
    config: &FlowConfig,
    model: &dyn ForwardModel,
    lik: &GaussianLikelihood,
    prior: &NominalPrior,
    radius: f64,
) -> core::result::Result<FlowTrace, FlowFailure> {
    let fail_no_trace = |error: Error| FlowFailure {
        error,
        failing_particle: None,
        partial: FlowTrace {
            nominal: ParticleEnsemble::from_scalars(&[0.0], EnsembleRole::Nominal)
                .expect("singleton ensemble"),
            records: Vec::new(),
            terminal: TerminalReason::Aborted,
        },
    };

    config.validate().map_err(&fail_no_trace)?;
    if lik.n_obs() != model.output_size() {
        return Err(fail_no_trace(Error::DimensionMismatch {
            expected: model.output_size(),
            found: lik.n_obs(),
        }));
    }

    let mut rng = Prng::seed_from(config.seed);
    let nominal = match prior {
        NominalPrior::Gaussian { mean, covariance } => {
            if mean.len() != model.dimension() {
                return Err(fail_no_trace(Error::DimensionMismatch {
                    expected: model.dimension(),
                    found: mean.len(),
                }));
            }
            ParticleEnsemble::sample_gaussian(
                config.n0,
                mean,
                covariance,
                EnsembleRole::Nominal,
                &mut rng,
            )
            .map_err(&fail_no_trace)?
        }
        NominalPrior::Particles(p) => {
            if p.len() != config.n0 {
                return Err(fail_no_trace(Error::SizeMismatch {
                    expected: config.n0,
                    found: p.len(),
                }));
            }
            if p.dim() != model.dimension() {
                return Err(fail_no_trace(Error::DimensionMismatch {
                    expected: model.dimension(),
                    found: p.dim(),
                }));
            }
            p.with_role(EnsembleRole::Nominal)
        }
    };
    let set = AmbiguitySet::new(nominal.clone(), radius).map_err(&fail_no_trace)?;

    let mut prior_ens = nominal.with_role(EnsembleRole::Prior);
    let mut posterior = nominal.with_role(EnsembleRole::PosteriorApprox);

    let mut records: Vec<IterationRecord> = Vec::new();
    let mut tau_state = config.tau;
    let mut discards = 0usize;
    let mut resets = 0usize;
    let mut phase: u8 = 1;
    let mut cooldown_remaining: Option<usize> = None;
    let mut terminal = TerminalReason::MaxIterations;

    for i in 0..config.n_max {
        if cooldown_remaining == Some(0) {
            terminal = TerminalReason::ResetsExhaustedPlusCooldown;
            break;
        }
        let phase_at_start = phase;
        let mut events = Vec::new();
        if phase == 1 && i >= config.na {
            phase = 2;
            events.push(FlowEvent::PhaseChange { phase: 2 });
        }

        let grads = match evaluate_gradients(config, model, lik, &posterior, i) {
            Ok(g) => g,
            Err((error, failing)) => return Err(fail_with(error, failing, &nominal, &mut records)),
        };

        let h_posterior = ensemble::median_bandwidth(&posterior)
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?;
        let h_prior = ensemble::median_bandwidth(&prior_ens)
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?;
        let posterior_kernel = KernelConfig::unnormalized(h_posterior)
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?;
        let prior_kernel = KernelConfig::unnormalized(h_prior)
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?;

        // Diagnostics of the state entering this iteration.
        let (w2_nominal_prior, _) = w2_distance(&nominal, &prior_ens)
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?;
        let (w2_nominal_posterior, _) = w2_distance(&nominal, &posterior)
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?;
        let (w2_posterior_prior, _) = w2_distance(&posterior, &prior_ens)
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?;
        let functional = functional_estimate(
            &posterior,
            &prior_ens,
            &grads.loglik_values,
            &prior_kernel,
            &posterior_kernel,
        )
        .map_err(|e| fail_with(e, None, &nominal, &mut records))?;

        // Prior update (interacting phase only).
        let mut tau_used = 0.0;
        if config.discard_scope == DiscardCounterScope::PerIteration {
            discards = 0;
        }
        let accepted_prior = if phase == 2 {
            let ratio_model = match config.ratio_estimator {
                RatioEstimatorKind::Rulsif => RatioModel::Rulsif(
                    fit_density_ratio(&posterior, &prior_ens, &config.ratio_settings, &mut rng)
                        .map_err(|e| fail_with(e, None, &nominal, &mut records))?,
                ),
                RatioEstimatorKind::KdeRatio => RatioModel::KdeQuotient(
                    KdeRatioModel::fit(&posterior, &prior_ens, config.ratio_settings.clip)
                        .map_err(|e| fail_with(e, None, &nominal, &mut records))?,
                ),
            };
            // Retry until feasible, the τ floor, or the discard budget; a
            // `None` outcome means the discard counter reached Nb and a reset
            // is due.
            let mut outcome: Option<ParticleEnsemble> = None;
            loop {
                if tau_state < config.min_tau {
                    discards += 1;
                    events.push(FlowEvent::TauFloor);
                    if discards < config.nb {
                        outcome = Some(prior_ens.clone());
                    }
                    break;
                }
                let proposal = prior_step(
                    &prior_ens,
                    &posterior,
                    tau_state,
                    config.mode,
                    &ratio_model,
                    &prior_kernel,
                    &posterior_kernel,
                )
                .map_err(|e| {
                    let e = match e {
                        Error::Divergence { .. } => Error::Divergence { iteration: i },
                        other => other,
                    };
                    fail_with(e, None, &nominal, &mut records)
                })?;
                let (inside, distance) = within_ambiguity(&set, &proposal)
                    .map_err(|e| fail_with(e, None, &nominal, &mut records))?;
                if inside {
                    tau_used = tau_state;
                    outcome = Some(proposal);
                    break;
                }
                discards += 1;
                events.push(FlowEvent::Discarded { distance });
                if discards >= config.nb {
                    break;
                }
                tau_state *= config.halving_factor;
                events.push(FlowEvent::Halved { tau: tau_state });
            }
            match outcome {
                Some(accepted) => accepted,
                None => {
                    let back = i.saturating_sub(config.nc);
                    let snapshot = records[back].prior.clone();
                    if config.restore_tau_on_reset {
                        tau_state = config.tau;
                    }
                    discards = 0;
                    resets += 1;
                    events.push(FlowEvent::Reset {
                        restored_from: back,
                    });
                    if resets >= config.n_reset {
                        phase = 3;
                        cooldown_remaining = Some(config.na);
                        events.push(FlowEvent::PhaseChange { phase: 3 });
                    }
                    snapshot
                }
            }
        } else {
            prior_ens.clone()
        };

        // Posterior update against the accepted prior.
        let accepted_prior_kernel = if accepted_prior == prior_ens {
            prior_kernel
        } else {
            KernelConfig::unnormalized(
                ensemble::median_bandwidth(&accepted_prior)
                    .map_err(|e| fail_with(e, None, &nominal, &mut records))?,
            )
            .map_err(|e| fail_with(e, None, &nominal, &mut records))?
        };
        let next_posterior = posterior_step(
            &posterior,
            &accepted_prior,
            &grads.loglik_grads,
            config.alpha,
            &accepted_prior_kernel,
            &posterior_kernel,
        )
        .map_err(|e| {
            let e = match e {
                Error::Divergence { .. } => Error::Divergence { iteration: i },
                other => other,
            };
            fail_with(e, None, &nominal, &mut records)
        })?;

        records.push(IterationRecord {
            index: i,
            posterior: posterior.clone(),
            prior: prior_ens.clone(),
            tau_used,
            alpha_used: config.alpha,
            w2_nominal_prior,
            w2_nominal_posterior,
            w2_posterior_prior,
            functional,
            events,
        });

        prior_ens = accepted_prior;
        posterior = next_posterior;

        if phase == 3 && phase_at_start == 3 {
            if let Some(c) = cooldown_remaining.as_mut() {
                *c -= 1;
            }
        }
    }

    Ok(FlowTrace {
        nominal,
        records,
        terminal,
    })
}
