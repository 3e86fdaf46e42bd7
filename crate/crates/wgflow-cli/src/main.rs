use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wgflow_cli::config::{load_config, resolve_defaults, ModeConfig};
use wgflow_cli::oracle::{self, DEFAULT_GRID_POINTS};
use wgflow_cli::runner::{execute_run, resolve, Overrides};

/// Robust Bayesian inference via interacting Wasserstein gradient flows.
#[derive(Parser)]
#[command(name = "wgflow", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Optimal,
    #[value(alias = "worst_case")]
    Worst,
}

impl From<ModeArg> for ModeConfig {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Optimal => ModeConfig::Optimal,
            ModeArg::Worst => ModeConfig::WorstCase,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the interacting flow and persist the particle, event, and
    /// diagnostic tables plus a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's mode.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config, printing the fully resolved document.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the 1-D quadrature posterior for the configured model.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), wgflow_cli::CliError> {
    match cli.command {
        Command::Run {
            config,
            mode,
            seed,
            out,
        } => {
            let resolved = resolve(
                &load_config(&config)?,
                Overrides {
                    mode: mode.map(Into::into),
                    seed,
                    output_dir: out.as_deref(),
                },
            )?;
            let outcome = execute_run(&resolved)?;
            println!(
                "{}: {} iterations, terminal {}, w2(nominal, prior) = {:.6}",
                outcome.output_dir.display(),
                outcome.summary.iterations,
                outcome.summary.terminal_reason,
                outcome.summary.final_w2_nominal_prior.unwrap_or(f64::NAN)
            );
            Ok(())
        }
        Command::Validate { config } => {
            let parsed = load_config(&config)?;
            let resolved = resolve_defaults(&parsed);
            // Materialise the run too, so semantic errors surface here.
            resolve(&parsed, Overrides::default())?;
            println!(
                "{}",
                serde_json::to_string_pretty(&resolved).expect("resolved config serialises")
            );
            Ok(())
        }
        Command::Oracle {
            config,
            out,
            grid_points,
            seed,
        } => {
            let resolved = resolve(
                &load_config(&config)?,
                Overrides {
                    mode: None,
                    seed,
                    output_dir: out.as_deref(),
                },
            )?;
            let table = oracle::oracle_posterior_1d(&resolved, grid_points)?;
            oracle::write_oracle_outputs(&resolved.output_dir, &resolved, &table)?;
            println!(
                "{}: posterior mean {:.6}, std {:.6} over {} grid points",
                resolved.output_dir.display(),
                table.mean,
                table.std,
                table.grid.len()
            );
            Ok(())
        }
    }
}
