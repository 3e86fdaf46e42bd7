//! Batch front end: config parsing, run orchestration, trace persistence,
//! and the quadrature oracle for 1-D posteriors.
//!
//! The binary exposes the `run`, `validate`, and `oracle` subcommands, all
//! driven by a JSON run configuration (see `config`). Everything the binary
//! does is reachable through this library so tests can call the same entry
//! points.

pub mod config;
pub mod error;
pub mod external;
pub mod oracle;
pub mod output;
pub mod runner;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
pub use oracle::{oracle_posterior_1d, OracleTable};
pub use runner::{execute_run, resolve, ResolvedRun, RunOutcome};
