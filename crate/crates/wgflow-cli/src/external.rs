//! Forward model backed by a subprocess: the parameter vector is appended to
//! the command line and the outputs are read back from stdout as whitespace-
//! separated numbers. One invocation per evaluation; evaluations are
//! serialised.

use std::process::Command;

use wgflow::error::Error;
use wgflow::models::ForwardModel;

use crate::config::ExternalConfig;

#[derive(Debug, Clone)]
pub struct ExternalModel {
    config: ExternalConfig,
}

impl ExternalModel {
    pub fn new(config: ExternalConfig) -> Self {
        ExternalModel { config }
    }
}

impl ForwardModel for ExternalModel {
    fn dimension(&self) -> usize {
        self.config.dimension
    }

    fn output_size(&self) -> usize {
        self.config.output_size
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Vec<f64>, Error> {
        let mut command = Command::new(&self.config.command);
        command.args(&self.config.args);
        for value in theta {
            command.arg(format!("{value}"));
        }
        let output = command
            .output()
            .map_err(|e| Error::InvalidInput(format!("external model spawn failed: {e}")))?;
        if !output.status.success() {
            return Err(Error::Domain("external model exited nonzero"));
        }
        let text = String::from_utf8_lossy(&output.stdout);
        let values: Result<Vec<f64>, _> = text
            .split_whitespace()
            .map(|token| token.parse::<f64>())
            .collect();
        let values =
            values.map_err(|e| Error::InvalidInput(format!("external model output: {e}")))?;
        if values.len() != self.config.output_size {
            return Err(Error::DimensionMismatch {
                expected: self.config.output_size,
                found: values.len(),
            });
        }
        Ok(values)
    }

    fn concurrency_safe(&self) -> bool {
        false
    }
}
