//! Builds the concrete run pieces out of a validated config and drives the
//! flow, persisting every output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use wgflow::ensemble::{EnsembleRole, ParticleEnsemble};
use wgflow::error::Error;
use wgflow::flow::{run_flow, FlowConfig, FlowTrace, NominalPrior};
use wgflow::gradients::GaussianLikelihood;
use wgflow::linalg::Mat;
use wgflow::models::{
    synthesize_observation, DoubleBananaModel, DoubleBeamModel, ForwardModel, MassSpringModel,
};

use crate::config::{
    load_config, resolve_defaults, to_flow_config, ModeConfig, ModelId, ObservationSource,
    PriorConfig, RunConfig,
};
use crate::error::CliError;
use crate::external::ExternalModel;
use crate::output;

/// Resolved design choices echoed into the run summary.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedChoices {
    pub gradient_provider: String,
    pub ratio_estimator: String,
    pub halved_likelihood_gradient: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_fixture: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_boundary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beam_k1: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub status: String,
    pub terminal_reason: String,
    pub iterations: usize,
    pub model: String,
    pub mode: String,
    pub seed: u64,
    pub ambiguity_radius: f64,
    pub y_obs: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_w2_nominal_prior: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_w2_nominal_posterior: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_w2_posterior_prior: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_functional: Option<f64>,
    pub elapsed_seconds: f64,
    pub resolved_choices: ResolvedChoices,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_particle: Option<(usize, usize)>,
}

/// A fully materialised run: model, likelihood, prior, and flow settings.
pub struct ResolvedRun {
    pub config: RunConfig,
    pub flow: FlowConfig,
    pub model: Box<dyn ForwardModel>,
    pub likelihood: GaussianLikelihood,
    pub prior: NominalPrior,
    pub radius: f64,
    pub output_dir: PathBuf,
    pub y_obs: Vec<f64>,
}

impl ResolvedRun {
    pub fn model_id_str(&self) -> &'static str {
        match self.config.model.id {
            ModelId::MassSpring => "mass_spring",
            ModelId::DoubleBanana => "double_banana",
            ModelId::DoubleBeam => "double_beam",
            ModelId::External => "external",
        }
    }

    pub fn mode_str(&self) -> &'static str {
        self.flow.mode.as_str()
    }

    pub fn resolved_choices(&self) -> ResolvedChoices {
        let beam = self.config.model.beam.as_ref();
        ResolvedChoices {
            gradient_provider: match self.flow.gradient_provider {
                wgflow::flow::GradientProviderKind::EnsembleJacobian => "ensemble_jacobian".into(),
                wgflow::flow::GradientProviderKind::GpSurrogate => "gp_surrogate".into(),
            },
            ratio_estimator: match self.flow.ratio_estimator {
                wgflow::flow::RatioEstimatorKind::Rulsif => "rulsif".into(),
                wgflow::flow::RatioEstimatorKind::KdeRatio => "kde_ratio".into(),
            },
            halved_likelihood_gradient: self.flow.halved_likelihood_gradient,
            beam_fixture: beam.map(|b| b.to_spec().fixture.as_str().to_string()),
            beam_boundary: beam.map(|b| b.to_spec().boundary.as_str().to_string()),
            beam_k1: beam.map(|b| b.k1),
        }
    }
}

/// Command-line overrides applied on top of the config document.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides<'a> {
    pub mode: Option<ModeConfig>,
    pub seed: Option<u64>,
    pub output_dir: Option<&'a Path>,
}

pub fn resolve_from_path(path: &Path, overrides: Overrides) -> Result<ResolvedRun, CliError> {
    let config = load_config(path)?;
    resolve(&config, overrides)
}

/// Applies overrides, fills defaults, and materialises the run.
pub fn resolve(config: &RunConfig, overrides: Overrides) -> Result<ResolvedRun, CliError> {
    let mut config = config.clone();
    if let Some(mode) = overrides.mode {
        config.mode = Some(mode);
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(dir) = overrides.output_dir {
        config.output_dir = Some(dir.to_path_buf());
    }
    let resolved = resolve_defaults(&config);
    let flow = to_flow_config(&resolved)?;

    let model: Box<dyn ForwardModel> = match resolved.model.id {
        ModelId::MassSpring => Box::new(MassSpringModel),
        ModelId::DoubleBanana => Box::new(DoubleBananaModel),
        ModelId::DoubleBeam => {
            let beam = resolved.model.beam.as_ref().expect("resolved beam config");
            let n_modes = resolved.model.n_modes.unwrap_or(8);
            Box::new(
                DoubleBeamModel::new(beam.to_spec(), n_modes)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            )
        }
        ModelId::External => {
            let external = resolved
                .model
                .external
                .clone()
                .ok_or_else(|| CliError::Config("external model config missing".into()))?;
            Box::new(ExternalModel::new(external))
        }
    };

    let observation = resolved.observation.as_ref().expect("resolved observation");
    let y_obs = match observation.source {
        ObservationSource::Literal => {
            let values = observation
                .values
                .clone()
                .expect("validated literal values");
            if values.len() != model.output_size() {
                return Err(CliError::Config(format!(
                    "observation.values has {} entries; the model emits {}",
                    values.len(),
                    model.output_size()
                )));
            }
            values
        }
        ObservationSource::Synthesize => {
            let theta_true = observation
                .theta_true
                .clone()
                .ok_or_else(|| CliError::Config("observation.theta_true is required".into()))?;
            if theta_true.len() != model.dimension() {
                return Err(CliError::Config(format!(
                    "observation.theta_true has {} entries; the model takes {}",
                    theta_true.len(),
                    model.dimension()
                )));
            }
            let noise = observation
                .noise_sigma
                .clone()
                .unwrap_or_else(|| vec![0.0; model.output_size()]);
            let seed = observation.seed.unwrap_or(resolved.seed);
            synthesize_observation(model.as_ref(), &theta_true, &noise, seed)
                .map_err(|e| CliError::Numeric(e.to_string()))?
        }
    };

    let std_devs = resolved
        .likelihood_std
        .clone()
        .expect("resolved likelihood std");
    if std_devs.len() != model.output_size() {
        return Err(CliError::Config(format!(
            "likelihood_std has {} entries; the model emits {}",
            std_devs.len(),
            model.output_size()
        )));
    }
    let variances: Vec<f64> = std_devs.iter().map(|s| s * s).collect();
    let likelihood = GaussianLikelihood::diagonal(y_obs.clone(), &variances)
        .map_err(|e| CliError::Numeric(e.to_string()))?;

    let prior = build_prior(
        resolved.nominal_prior.as_ref().expect("resolved prior"),
        model.dimension(),
        flow.n0,
    )?;

    let output_dir = resolved.output_dir.clone().unwrap_or_else(|| {
        PathBuf::from(format!(
            "out/{}_{}_seed{}",
            match resolved.model.id {
                ModelId::MassSpring => "mass_spring",
                ModelId::DoubleBanana => "double_banana",
                ModelId::DoubleBeam => "double_beam",
                ModelId::External => "external",
            },
            match resolved.mode.unwrap_or(ModeConfig::Optimal) {
                ModeConfig::Optimal => "optimal",
                ModeConfig::WorstCase => "worst_case",
            },
            resolved.seed
        ))
    });

    Ok(ResolvedRun {
        radius: resolved.ambiguity_radius,
        config: resolved,
        flow,
        model,
        likelihood,
        prior,
        output_dir,
        y_obs,
    })
}

fn build_prior(prior: &PriorConfig, dimension: usize, n0: usize) -> Result<NominalPrior, CliError> {
    if let Some(path) = &prior.particles_path {
        let ensemble = load_particles(path, dimension, n0)?;
        return Ok(NominalPrior::Particles(ensemble));
    }
    let mean = prior
        .mean
        .clone()
        .ok_or_else(|| CliError::Config("nominal_prior.mean is required".into()))?;
    if mean.len() != dimension {
        return Err(CliError::Config(format!(
            "nominal_prior.mean has {} entries; the model takes {dimension}",
            mean.len()
        )));
    }
    let covariance = if let Some(rows) = &prior.covariance {
        if rows.len() != dimension || rows.iter().any(|r| r.len() != dimension) {
            return Err(CliError::Config(
                "nominal_prior.covariance must be a square matrix matching the dimension".into(),
            ));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Mat::from_rows(dimension, dimension, &flat)
    } else if let Some(vars) = &prior.variances {
        if vars.len() != dimension {
            return Err(CliError::Config(format!(
                "nominal_prior.variances has {} entries; the model takes {dimension}",
                vars.len()
            )));
        }
        let mut m = Mat::zeros(dimension, dimension);
        for (i, v) in vars.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    } else {
        return Err(CliError::Config(
            "nominal_prior needs covariance or variances".into(),
        ));
    };
    Ok(NominalPrior::Gaussian { mean, covariance })
}

fn load_particles(path: &Path, dimension: usize, n0: usize) -> Result<ParticleEnsemble, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut coords = Vec::new();
    let mut count = 0usize;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values: Result<Vec<f64>, _> = line
            .split(',')
            .map(|token| token.trim().parse::<f64>())
            .collect();
        let values = values.map_err(|e| {
            CliError::Config(format!(
                "{}:{}: bad particle row: {e}",
                path.display(),
                line_no + 1
            ))
        })?;
        if values.len() != dimension {
            return Err(CliError::Config(format!(
                "{}:{}: expected {dimension} coordinates, got {}",
                path.display(),
                line_no + 1,
                values.len()
            )));
        }
        coords.extend(values);
        count += 1;
    }
    if count != n0 {
        return Err(CliError::Config(format!(
            "particle file holds {count} particles but n0 = {n0}"
        )));
    }
    ParticleEnsemble::new(coords, count, dimension, EnsembleRole::Nominal)
        .map_err(|e| CliError::Config(e.to_string()))
}

/// The completed run: the trace plus where everything was written.
pub struct RunOutcome {
    pub trace: FlowTrace,
    pub summary: RunSummary,
    pub output_dir: PathBuf,
}

/// Runs the flow and persists the particle table, events log, diagnostics
/// table, and summary. On failure the partial outputs are flushed with a
/// `failed` summary (when at least one record exists) and the error is
/// returned.
pub fn execute_run(resolved: &ResolvedRun) -> Result<RunOutcome, CliError> {
    std::fs::create_dir_all(&resolved.output_dir)
        .map_err(CliError::io(resolved.output_dir.clone()))?;
    let start = Instant::now();
    let result = run_flow(
        &resolved.flow,
        resolved.model.as_ref(),
        &resolved.likelihood,
        &resolved.prior,
        resolved.radius,
    );
    let elapsed = start.elapsed().as_secs_f64();

    match result {
        Ok(trace) => {
            let summary = summarize(resolved, &trace, elapsed, None, None);
            output::write_run_outputs(&resolved.output_dir, &trace, &summary)?;
            Ok(RunOutcome {
                trace,
                summary,
                output_dir: resolved.output_dir.clone(),
            })
        }
        Err(failure) => {
            let message = failure.error.to_string();
            if !failure.partial.records.is_empty() {
                let summary = summarize(
                    resolved,
                    &failure.partial,
                    elapsed,
                    Some(message.clone()),
                    failure.failing_particle,
                );
                output::write_run_outputs(&resolved.output_dir, &failure.partial, &summary)?;
            }
            Err(match (failure.error, failure.failing_particle) {
                (
                    Error::ModelEvaluation {
                        iteration,
                        particle,
                    },
                    _,
                ) => CliError::Model {
                    message,
                    iteration,
                    particle,
                },
                (_, Some((iteration, particle))) => CliError::Model {
                    message,
                    iteration,
                    particle,
                },
                _ => CliError::Numeric(message),
            })
        }
    }
}

fn summarize(
    resolved: &ResolvedRun,
    trace: &FlowTrace,
    elapsed: f64,
    error: Option<String>,
    failing_particle: Option<(usize, usize)>,
) -> RunSummary {
    let last = trace.records.last();
    RunSummary {
        status: if error.is_none() { "success" } else { "failed" }.into(),
        terminal_reason: trace.terminal.as_str().into(),
        iterations: trace.records.len(),
        model: resolved.model_id_str().into(),
        mode: resolved.mode_str().into(),
        seed: resolved.flow.seed,
        ambiguity_radius: resolved.radius,
        y_obs: resolved.y_obs.clone(),
        final_w2_nominal_prior: last.map(|r| r.w2_nominal_prior),
        final_w2_nominal_posterior: last.map(|r| r.w2_nominal_posterior),
        final_w2_posterior_prior: last.map(|r| r.w2_posterior_prior),
        final_functional: last.map(|r| r.functional),
        elapsed_seconds: elapsed,
        resolved_choices: resolved.resolved_choices(),
        error,
        failing_particle,
    }
}
