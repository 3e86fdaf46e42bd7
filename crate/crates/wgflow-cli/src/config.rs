//! Run configuration: a strict JSON schema with per-model defaults.
//!
//! Only `model`, `ambiguity_radius`, and `seed` are always required; every
//! other field falls back to the bundled case-study defaults for the chosen
//! model and mode (prior, observation, likelihood, step sizes, counters).
//! Unknown keys are rejected outright.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wgflow::flow::{FlowConfig, FlowMode, GradientProviderKind, RatioEstimatorKind};
use wgflow::models::beam::REFERENCE_FREQUENCIES_HZ;
use wgflow::models::{BeamSpec, BoundaryCondition, FixtureModel};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    MassSpring,
    DoubleBanana,
    DoubleBeam,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    Optimal,
    WorstCase,
}

impl From<ModeConfig> for FlowMode {
    fn from(value: ModeConfig) -> Self {
        match value {
            ModeConfig::Optimal => FlowMode::Optimal,
            ModeConfig::WorstCase => FlowMode::WorstCase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    FreeFree,
    ClampedClamped,
    ClampedFree,
}

impl From<BoundaryConfig> for BoundaryCondition {
    fn from(value: BoundaryConfig) -> Self {
        match value {
            BoundaryConfig::FreeFree => BoundaryCondition::FreeFree,
            BoundaryConfig::ClampedClamped => BoundaryCondition::ClampedClamped,
            BoundaryConfig::ClampedFree => BoundaryCondition::ClampedFree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureConfig {
    TransverseParallel,
    ShearLeverArm,
    RotationUnitLever,
}

impl From<FixtureConfig> for FixtureModel {
    fn from(value: FixtureConfig) -> Self {
        match value {
            FixtureConfig::TransverseParallel => FixtureModel::TransverseParallel,
            FixtureConfig::ShearLeverArm => FixtureModel::ShearLeverArm,
            FixtureConfig::RotationUnitLever => FixtureModel::RotationUnitLever,
        }
    }
}

/// Coupled-beam geometry and fixture data, SI units; defaults are the
/// resolved nominal configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamConfig {
    pub thickness_a: f64,
    pub thickness_b: f64,
    pub width: f64,
    pub length: f64,
    pub offset_left: f64,
    pub offset_right: f64,
    pub youngs_modulus: f64,
    pub density: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub elements_per_beam: usize,
    pub boundary: BoundaryConfig,
    pub fixture: FixtureConfig,
}

impl Default for BeamConfig {
    fn default() -> Self {
        let spec = BeamSpec::default();
        BeamConfig {
            thickness_a: spec.thickness_a,
            thickness_b: spec.thickness_b,
            width: spec.width,
            length: spec.length,
            offset_left: spec.offset_left,
            offset_right: spec.offset_right,
            youngs_modulus: spec.youngs_modulus,
            density: spec.density,
            k1: spec.k1,
            k2: spec.k2,
            k3: spec.k3,
            elements_per_beam: spec.elements_per_beam,
            boundary: BoundaryConfig::FreeFree,
            fixture: FixtureConfig::ShearLeverArm,
        }
    }
}

impl BeamConfig {
    pub fn to_spec(&self) -> BeamSpec {
        BeamSpec {
            thickness_a: self.thickness_a,
            thickness_b: self.thickness_b,
            width: self.width,
            length: self.length,
            offset_left: self.offset_left,
            offset_right: self.offset_right,
            youngs_modulus: self.youngs_modulus,
            density: self.density,
            k1: self.k1,
            k2: self.k2,
            k3: self.k3,
            elements_per_beam: self.elements_per_beam,
            boundary: self.boundary.into(),
            fixture: self.fixture.into(),
        }
    }
}

/// A command invoked once per model evaluation: the parameter vector is
/// appended as arguments and the outputs are read from stdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub dimension: usize,
    pub output_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: ModelId,
    /// Coupled-beam data; only valid with `id = "double_beam"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam: Option<BeamConfig>,
    /// Modes observed from the beam model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_modes: Option<usize>,
    /// Subprocess model; only valid with `id = "external"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub mean: Option<Vec<f64>>,
    /// Full covariance matrix, row-major.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Diagonal shorthand, exclusive with `covariance`.
    pub variances: Option<Vec<f64>>,
    /// CSV particle file (one particle per line), exclusive with the
    /// parametric fields.
    pub particles_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationSource {
    Synthesize,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub source: ObservationSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

/// Flow settings; unset fields take the model defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    pub alpha: Option<f64>,
    pub tau: Option<f64>,
    pub n0: Option<usize>,
    pub na: Option<usize>,
    pub nb: Option<usize>,
    pub nc: Option<usize>,
    pub n_reset: Option<usize>,
    pub n_max: Option<usize>,
    pub halving_factor: Option<f64>,
    pub min_tau: Option<f64>,
    pub gradient_provider: Option<GradientProviderConfig>,
    pub ratio_estimator: Option<RatioEstimatorConfig>,
    pub ratio_alpha_mix: Option<f64>,
    pub discard_scope: Option<DiscardScopeConfig>,
    pub halved_likelihood_gradient: Option<bool>,
    pub restore_tau_on_reset: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardScopeConfig {
    PerIteration,
    Run,
}

impl From<DiscardScopeConfig> for wgflow::flow::DiscardCounterScope {
    fn from(value: DiscardScopeConfig) -> Self {
        match value {
            DiscardScopeConfig::PerIteration => wgflow::flow::DiscardCounterScope::PerIteration,
            DiscardScopeConfig::Run => wgflow::flow::DiscardCounterScope::Run,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientProviderConfig {
    EnsembleJacobian,
    GpSurrogate,
}

impl From<GradientProviderConfig> for GradientProviderKind {
    fn from(value: GradientProviderConfig) -> Self {
        match value {
            GradientProviderConfig::EnsembleJacobian => GradientProviderKind::EnsembleJacobian,
            GradientProviderConfig::GpSurrogate => GradientProviderKind::GpSurrogate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioEstimatorConfig {
    Rulsif,
    KdeRatio,
}

impl From<RatioEstimatorConfig> for RatioEstimatorKind {
    fn from(value: RatioEstimatorConfig) -> Self {
        match value {
            RatioEstimatorConfig::Rulsif => RatioEstimatorKind::Rulsif,
            RatioEstimatorConfig::KdeRatio => RatioEstimatorKind::KdeRatio,
        }
    }
}

/// The full run configuration as written by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub ambiguity_radius: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nominal_prior: Option<PriorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationConfig>,
    /// Per-output likelihood standard deviations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood_std: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub flow: FlowSettings,
}

/// Parses and validates a config document. Syntax errors carry line and
/// column; unknown fields are named.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    validate(&config)?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_config(&text)
}

fn validate(config: &RunConfig) -> Result<(), CliError> {
    if !(config.ambiguity_radius >= 0.0) || !config.ambiguity_radius.is_finite() {
        return Err(CliError::Config(format!(
            "ambiguity_radius must be nonnegative and finite, got {}",
            config.ambiguity_radius
        )));
    }
    match config.model.id {
        ModelId::DoubleBeam => {}
        _ => {
            if config.model.beam.is_some() || config.model.n_modes.is_some() {
                return Err(CliError::Config(
                    "model.beam and model.n_modes are only valid for double_beam".into(),
                ));
            }
        }
    }
    match config.model.id {
        ModelId::External => {
            if config.model.external.is_none() {
                return Err(CliError::Config(
                    "model.external is required for id = external".into(),
                ));
            }
        }
        _ => {
            if config.model.external.is_some() {
                return Err(CliError::Config(
                    "model.external is only valid for id = external".into(),
                ));
            }
        }
    }
    if let Some(prior) = &config.nominal_prior {
        let parametric =
            prior.mean.is_some() || prior.covariance.is_some() || prior.variances.is_some();
        if prior.particles_path.is_some() && parametric {
            return Err(CliError::Config(
                "nominal_prior: give either particles_path or the parametric fields, not both"
                    .into(),
            ));
        }
        if prior.covariance.is_some() && prior.variances.is_some() {
            return Err(CliError::Config(
                "nominal_prior: covariance and variances are exclusive".into(),
            ));
        }
        if let Some(path) = &prior.particles_path {
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "nominal_prior.particles_path does not exist: {}",
                    path.display()
                )));
            }
        }
    }
    if let Some(obs) = &config.observation {
        match obs.source {
            ObservationSource::Synthesize => {
                if obs.values.is_some() {
                    return Err(CliError::Config(
                        "observation.values is only valid with source = literal".into(),
                    ));
                }
            }
            ObservationSource::Literal => {
                if obs.values.is_none() {
                    return Err(CliError::Config(
                        "observation.values is required with source = literal".into(),
                    ));
                }
                if obs.theta_true.is_some() || obs.noise_sigma.is_some() || obs.seed.is_some() {
                    return Err(CliError::Config(
                        "observation synthesis fields are invalid with source = literal".into(),
                    ));
                }
            }
        }
    }
    if let Some(std_devs) = &config.likelihood_std {
        if std_devs.iter().any(|s| !(*s > 0.0)) {
            return Err(CliError::Config(
                "likelihood_std entries must be positive".into(),
            ));
        }
    }
    Ok(())
}

/// Everything a model contributes to unset config fields.
pub struct ModelDefaults {
    pub prior_mean: Vec<f64>,
    pub prior_variances: Vec<f64>,
    pub likelihood_std: Vec<f64>,
    pub observation: ObservationConfig,
    pub alpha: f64,
    pub tau_optimal: f64,
    pub tau_worst: f64,
    pub gradient_provider: GradientProviderConfig,
}

/// Case-study defaults per model. The double-banana observation synthesises
/// from a fixed on-curve parameter; the beam observes the reference
/// frequencies directly with 2% standard deviations.
pub fn model_defaults(id: ModelId, external: Option<&ExternalConfig>) -> ModelDefaults {
    match id {
        ModelId::MassSpring => ModelDefaults {
            prior_mean: vec![1.0],
            prior_variances: vec![0.1],
            likelihood_std: vec![0.1_f64.sqrt()],
            observation: ObservationConfig {
                source: ObservationSource::Synthesize,
                theta_true: Some(vec![1.0]),
                noise_sigma: Some(vec![0.1_f64.sqrt()]),
                seed: Some(0),
                values: None,
            },
            alpha: 3e-3,
            tau_optimal: 3e-4,
            tau_worst: 3e-4,
            gradient_provider: GradientProviderConfig::EnsembleJacobian,
        },
        ModelId::DoubleBanana => ModelDefaults {
            prior_mean: vec![0.0, 0.0],
            prior_variances: vec![1.0, 1.0],
            likelihood_std: vec![0.3],
            observation: ObservationConfig {
                source: ObservationSource::Synthesize,
                theta_true: Some(vec![1.0, 0.5]),
                noise_sigma: Some(vec![0.3]),
                seed: Some(0),
                values: None,
            },
            alpha: 3e-3,
            tau_optimal: 1.5e-3,
            tau_worst: 3e-4,
            gradient_provider: GradientProviderConfig::EnsembleJacobian,
        },
        ModelId::DoubleBeam => {
            let std_devs: Vec<f64> = REFERENCE_FREQUENCIES_HZ.iter().map(|f| 0.02 * f).collect();
            ModelDefaults {
                prior_mean: vec![1.0; 4],
                prior_variances: vec![0.03; 4],
                likelihood_std: std_devs,
                observation: ObservationConfig {
                    source: ObservationSource::Literal,
                    theta_true: None,
                    noise_sigma: None,
                    seed: None,
                    values: Some(REFERENCE_FREQUENCIES_HZ.to_vec()),
                },
                alpha: 5e-5,
                tau_optimal: 2.5e-3,
                tau_worst: 5e-5,
                gradient_provider: GradientProviderConfig::GpSurrogate,
            }
        }
        ModelId::External => {
            let dim = external.map_or(1, |e| e.dimension);
            let n_obs = external.map_or(1, |e| e.output_size);
            ModelDefaults {
                prior_mean: vec![0.0; dim],
                prior_variances: vec![1.0; dim],
                likelihood_std: vec![1.0; n_obs],
                observation: ObservationConfig {
                    source: ObservationSource::Synthesize,
                    theta_true: Some(vec![0.0; dim]),
                    noise_sigma: Some(vec![1.0; n_obs]),
                    seed: Some(0),
                    values: None,
                },
                alpha: 3e-3,
                tau_optimal: 3e-4,
                tau_worst: 3e-4,
                gradient_provider: GradientProviderConfig::EnsembleJacobian,
            }
        }
    }
}

/// Fills every unset field from the model defaults, producing a config that
/// reparses to itself.
pub fn resolve_defaults(config: &RunConfig) -> RunConfig {
    let defaults = model_defaults(config.model.id, config.model.external.as_ref());
    let mode = config.mode.unwrap_or(ModeConfig::Optimal);
    let mut resolved = config.clone();
    resolved.mode = Some(mode);
    if config.model.id == ModelId::DoubleBeam {
        resolved.model.beam = Some(config.model.beam.clone().unwrap_or_default());
        resolved.model.n_modes = Some(config.model.n_modes.unwrap_or(8));
    }
    resolved.nominal_prior = Some(match &config.nominal_prior {
        Some(prior) if prior.particles_path.is_some() => prior.clone(),
        Some(prior) => PriorConfig {
            mean: Some(prior.mean.clone().unwrap_or(defaults.prior_mean.clone())),
            covariance: prior.covariance.clone(),
            variances: if prior.covariance.is_some() {
                None
            } else {
                Some(
                    prior
                        .variances
                        .clone()
                        .unwrap_or(defaults.prior_variances.clone()),
                )
            },
            particles_path: None,
        },
        None => PriorConfig {
            mean: Some(defaults.prior_mean.clone()),
            covariance: None,
            variances: Some(defaults.prior_variances.clone()),
            particles_path: None,
        },
    });
    resolved.observation = Some(config.observation.clone().unwrap_or(defaults.observation));
    resolved.likelihood_std = Some(
        config
            .likelihood_std
            .clone()
            .unwrap_or(defaults.likelihood_std),
    );
    let tau_default = match mode {
        ModeConfig::Optimal => defaults.tau_optimal,
        ModeConfig::WorstCase => defaults.tau_worst,
    };
    resolved.flow = FlowSettings {
        alpha: Some(config.flow.alpha.unwrap_or(defaults.alpha)),
        tau: Some(config.flow.tau.unwrap_or(tau_default)),
        n0: Some(config.flow.n0.unwrap_or(100)),
        na: Some(config.flow.na.unwrap_or(50)),
        nb: Some(config.flow.nb.unwrap_or(5)),
        nc: Some(config.flow.nc.unwrap_or(10)),
        n_reset: Some(config.flow.n_reset.unwrap_or(2)),
        n_max: Some(config.flow.n_max.unwrap_or(400)),
        halving_factor: Some(config.flow.halving_factor.unwrap_or(0.5)),
        min_tau: Some(config.flow.min_tau.unwrap_or(1e-12)),
        gradient_provider: Some(
            config
                .flow
                .gradient_provider
                .unwrap_or(defaults.gradient_provider),
        ),
        ratio_estimator: Some(
            config
                .flow
                .ratio_estimator
                .unwrap_or(RatioEstimatorConfig::Rulsif),
        ),
        ratio_alpha_mix: Some(config.flow.ratio_alpha_mix.unwrap_or(0.1)),
        discard_scope: Some(
            config
                .flow
                .discard_scope
                .unwrap_or(DiscardScopeConfig::PerIteration),
        ),
        halved_likelihood_gradient: Some(config.flow.halved_likelihood_gradient.unwrap_or(false)),
        restore_tau_on_reset: Some(config.flow.restore_tau_on_reset.unwrap_or(true)),
    };
    resolved
}

/// Flow configuration of a resolved config.
pub fn to_flow_config(resolved: &RunConfig) -> Result<FlowConfig, CliError> {
    let flow = &resolved.flow;
    let mode: FlowMode = resolved
        .mode
        .ok_or_else(|| CliError::Config("config is not resolved".into()))?
        .into();
    let ratio_settings = wgflow::ratio::RatioSettings {
        alpha_mix: flow.ratio_alpha_mix.unwrap_or(0.1),
        ..wgflow::ratio::RatioSettings::default()
    };
    let config = FlowConfig {
        alpha: flow.alpha.unwrap_or(3e-3),
        tau: flow.tau.unwrap_or(3e-4),
        n0: flow.n0.unwrap_or(100),
        na: flow.na.unwrap_or(50),
        nb: flow.nb.unwrap_or(5),
        nc: flow.nc.unwrap_or(10),
        n_reset: flow.n_reset.unwrap_or(2),
        n_max: flow.n_max.unwrap_or(400),
        mode,
        halving_factor: flow.halving_factor.unwrap_or(0.5),
        min_tau: flow.min_tau.unwrap_or(1e-12),
        gradient_provider: flow
            .gradient_provider
            .unwrap_or(GradientProviderConfig::EnsembleJacobian)
            .into(),
        ratio_estimator: flow
            .ratio_estimator
            .unwrap_or(RatioEstimatorConfig::Rulsif)
            .into(),
        ratio_settings,
        discard_scope: flow
            .discard_scope
            .unwrap_or(DiscardScopeConfig::PerIteration)
            .into(),
        halved_likelihood_gradient: flow.halved_likelihood_gradient.unwrap_or(false),
        restore_tau_on_reset: flow.restore_tau_on_reset.unwrap_or(true),
        seed: resolved.seed,
    };
    config
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_banana_config_gets_counter_defaults() {
        let text = r#"{"model": {"id": "double_banana"}, "ambiguity_radius": 0.05, "seed": 7}"#;
        let config = parse_config(text).unwrap();
        let resolved = resolve_defaults(&config);
        let flow = to_flow_config(&resolved).unwrap();
        assert_eq!(flow.n0, 100);
        assert_eq!(flow.na, 50);
        assert_eq!(flow.nb, 5);
        assert_eq!(flow.nc, 10);
        assert_eq!(flow.n_reset, 2);
        assert_eq!(flow.n_max, 400);
        assert_eq!(flow.mode, FlowMode::Optimal);
        assert_eq!(flow.tau, 1.5e-3);
        assert_eq!(flow.seed, 7);
    }

    #[test]
    fn unknown_field_is_named() {
        let text = r#"{"model": {"id": "double_banana"}, "ambiguity_radius": 0.05, "seed": 7, "NmaxTypo": 3}"#;
        let err = parse_config(text).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("NmaxTypo"), "got: {message}");
    }

    #[test]
    fn syntax_error_carries_line_and_column() {
        let err = parse_config("{\n  \"model\": nonsense\n}").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line 2"), "got: {message}");
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"{"model": {"id": "mass_spring"}, "ambiguity_radius": 0.005, "seed": 3,
                       "mode": "worst_case", "flow": {"alpha": 0.001}}"#;
        let resolved = resolve_defaults(&parse_config(text).unwrap());
        let serialized = serde_json::to_string_pretty(&resolved).unwrap();
        let reparsed = parse_config(&serialized).unwrap();
        assert_eq!(resolved, reparsed);
        let re_resolved = resolve_defaults(&reparsed);
        assert_eq!(resolved, re_resolved);
    }

    #[test]
    fn worst_case_mode_picks_worst_case_tau() {
        let text = r#"{"model": {"id": "double_banana"}, "ambiguity_radius": 0.05, "seed": 1,
                       "mode": "worst_case"}"#;
        let flow = to_flow_config(&resolve_defaults(&parse_config(text).unwrap())).unwrap();
        assert_eq!(flow.tau, 3e-4);
        assert_eq!(flow.mode, FlowMode::WorstCase);
    }

    #[test]
    fn beam_config_defaults_are_materialized() {
        let text = r#"{"model": {"id": "double_beam"}, "ambiguity_radius": 0.04, "seed": 5}"#;
        let resolved = resolve_defaults(&parse_config(text).unwrap());
        let beam = resolved.model.beam.as_ref().unwrap();
        assert_eq!(beam.elements_per_beam, 200);
        assert_eq!(beam.fixture, FixtureConfig::ShearLeverArm);
        assert_eq!(resolved.model.n_modes, Some(8));
        let flow = to_flow_config(&resolved).unwrap();
        assert_eq!(flow.gradient_provider, GradientProviderKind::GpSurrogate);
        assert_eq!(flow.alpha, 5e-5);
        let obs = resolved.observation.as_ref().unwrap();
        assert_eq!(obs.source, ObservationSource::Literal);
        assert_eq!(obs.values.as_deref(), Some(&REFERENCE_FREQUENCIES_HZ[..]));
        // Likelihood standard deviations default to 2% of each observed value.
        let stds = resolved.likelihood_std.as_ref().unwrap();
        for (s, f) in stds.iter().zip(REFERENCE_FREQUENCIES_HZ.iter()) {
            assert!((s - 0.02 * f).abs() < 1e-12);
        }
    }

    #[test]
    fn literal_observation_requires_values() {
        let text = r#"{"model": {"id": "mass_spring"}, "ambiguity_radius": 0.005, "seed": 1,
                       "observation": {"source": "literal"}}"#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn beam_fields_rejected_on_other_models() {
        let text =
            r#"{"model": {"id": "mass_spring", "n_modes": 4}, "ambiguity_radius": 0.1, "seed": 1}"#;
        assert!(parse_config(text).is_err());
    }
}
