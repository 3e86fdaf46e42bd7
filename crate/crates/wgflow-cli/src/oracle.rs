//! Quadrature oracle for 1-D models: the normalised posterior on a uniform
//! grid, by direct evaluation of prior × likelihood.

use std::path::Path;

use serde::Serialize;

use wgflow::flow::NominalPrior;

use crate::error::CliError;
use crate::output;
use crate::runner::ResolvedRun;

pub const DEFAULT_GRID_POINTS: usize = 4001;

/// Gridded posterior with its trapezoid moments.
#[derive(Debug, Clone)]
pub struct OracleTable {
    pub grid: Vec<f64>,
    pub unnormalized: Vec<f64>,
    pub normalized: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    grid_points: usize,
    grid_lo: f64,
    grid_hi: f64,
    posterior_mean: f64,
    posterior_std: f64,
    y_obs: Vec<f64>,
}

/// Computes the posterior by quadrature over `mean ± 8 std` of the nominal
/// prior. The model must be one-dimensional and the prior parametric
/// Gaussian; points where the model is undefined carry zero density.
pub fn oracle_posterior_1d(
    resolved: &ResolvedRun,
    grid_points: usize,
) -> Result<OracleTable, CliError> {
    if resolved.model.dimension() != 1 {
        return Err(CliError::Config(format!(
            "the posterior oracle needs a 1-D model; this one takes {}",
            resolved.model.dimension()
        )));
    }
    let (prior_mean, prior_var) = match &resolved.prior {
        NominalPrior::Gaussian { mean, covariance } => (mean[0], covariance[(0, 0)]),
        NominalPrior::Particles(_) => {
            return Err(CliError::Config(
                "the posterior oracle needs a parametric Gaussian prior".into(),
            ))
        }
    };
    if grid_points < 3 {
        return Err(CliError::Config(
            "oracle grid needs at least 3 points".into(),
        ));
    }
    let prior_std = prior_var.sqrt();
    let lo = prior_mean - 8.0 * prior_std;
    let hi = prior_mean + 8.0 * prior_std;
    let step = (hi - lo) / (grid_points - 1) as f64;

    let mut grid = Vec::with_capacity(grid_points);
    let mut log_unnorm = Vec::with_capacity(grid_points);
    for i in 0..grid_points {
        let theta = lo + step * i as f64;
        grid.push(theta);
        let value = match resolved.model.evaluate(&[theta]) {
            Ok(y) => {
                let loglik = resolved
                    .likelihood
                    .log_likelihood(&y)
                    .map_err(|e| CliError::Numeric(e.to_string()))?;
                let z = (theta - prior_mean) / prior_std;
                let log_prior = -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI * prior_var).ln();
                Some(log_prior + loglik)
            }
            Err(_) => None,
        };
        log_unnorm.push(value);
    }

    let unnormalized: Vec<f64> = log_unnorm.iter().map(|v| v.map_or(0.0, f64::exp)).collect();
    let mass = trapezoid(&unnormalized, step);
    if !(mass > 0.0) {
        return Err(CliError::Numeric(
            "the posterior mass vanished on the oracle grid".into(),
        ));
    }
    let normalized: Vec<f64> = unnormalized.iter().map(|v| v / mass).collect();

    let weighted: Vec<f64> = normalized
        .iter()
        .zip(grid.iter())
        .map(|(p, t)| p * t)
        .collect();
    let mean = trapezoid(&weighted, step);
    let second: Vec<f64> = normalized
        .iter()
        .zip(grid.iter())
        .map(|(p, t)| p * (t - mean) * (t - mean))
        .collect();
    let std = trapezoid(&second, step).sqrt();

    Ok(OracleTable {
        grid,
        unnormalized,
        normalized,
        mean,
        std,
    })
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    step * (0.5 * values[0] + interior + 0.5 * values[values.len() - 1])
}

/// Writes `oracle.csv` and `oracle_summary.json` under the given directory.
pub fn write_oracle_outputs(
    dir: &Path,
    resolved: &ResolvedRun,
    table: &OracleTable,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    output::write_oracle(&dir.join("oracle.csv"), table)?;
    let summary = OracleSummary {
        grid_points: table.grid.len(),
        grid_lo: table.grid[0],
        grid_hi: *table.grid.last().unwrap(),
        posterior_mean: table.mean,
        posterior_std: table.std,
        y_obs: resolved.y_obs.clone(),
    };
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Numeric(format!("oracle summary serialisation: {e}")))?;
    std::fs::write(output::oracle_summary_path(dir), text + "\n")
        .map_err(CliError::io(output::oracle_summary_path(dir)))
}
