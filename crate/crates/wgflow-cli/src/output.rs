//! Plain-CSV persistence of a flow trace plus the JSON run summary.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! parsed-back table reconstructs the exact particle positions and the files
//! are byte-identical across reruns with the same seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use wgflow::ensemble::ParticleEnsemble;
use wgflow::flow::{FlowEvent, FlowTrace};

use crate::error::CliError;
use crate::runner::RunSummary;

pub const PARTICLES_FILE: &str = "particles.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SUMMARY_FILE: &str = "summary.json";

pub fn write_run_outputs(
    dir: &Path,
    trace: &FlowTrace,
    summary: &RunSummary,
) -> Result<(), CliError> {
    write_particles(&dir.join(PARTICLES_FILE), trace)?;
    write_events(&dir.join(EVENTS_FILE), trace)?;
    write_diagnostics(&dir.join(DIAGNOSTICS_FILE), trace)?;
    write_summary(&dir.join(SUMMARY_FILE), summary)?;
    Ok(())
}

fn writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(
        File::create(path).map_err(CliError::io(path))?,
    ))
}

fn write_ensemble_rows(
    out: &mut impl Write,
    iteration: usize,
    ensemble: &ParticleEnsemble,
) -> std::io::Result<()> {
    let role = ensemble.role().as_str();
    for (index, particle) in ensemble.iter().enumerate() {
        write!(out, "{iteration},{role},{index}")?;
        for value in particle {
            write!(out, ",{value}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Per-iteration particle table. The nominal ensemble is emitted once under
/// iteration 0 with role `nominal`; each record contributes its prior and
/// posterior rows.
pub fn write_particles(path: &Path, trace: &FlowTrace) -> Result<(), CliError> {
    let mut out = writer(path)?;
    let io_err = CliError::io(path);
    let mut run = || -> std::io::Result<()> {
        write!(out, "iteration,role,particle")?;
        for k in 1..=trace.nominal.dim() {
            write!(out, ",theta_{k}")?;
        }
        writeln!(out)?;
        write_ensemble_rows(&mut out, 0, &trace.nominal)?;
        for record in &trace.records {
            write_ensemble_rows(&mut out, record.index, &record.prior)?;
            write_ensemble_rows(&mut out, record.index, &record.posterior)?;
        }
        out.flush()
    };
    run().map_err(io_err)
}

/// Control-event log: one row per halving, discard, floor hit, reset, or
/// phase change.
pub fn write_events(path: &Path, trace: &FlowTrace) -> Result<(), CliError> {
    let mut out = writer(path)?;
    let io_err = CliError::io(path);
    let mut run = || -> std::io::Result<()> {
        writeln!(out, "iteration,event,value")?;
        for record in &trace.records {
            for event in &record.events {
                match event {
                    FlowEvent::PhaseChange { phase } => {
                        writeln!(out, "{},phase_change,{phase}", record.index)?
                    }
                    FlowEvent::Discarded { distance } => {
                        writeln!(out, "{},discarded,{distance}", record.index)?
                    }
                    FlowEvent::Halved { tau } => writeln!(out, "{},halved,{tau}", record.index)?,
                    FlowEvent::TauFloor => writeln!(out, "{},tau_floor,", record.index)?,
                    FlowEvent::Reset { restored_from } => {
                        writeln!(out, "{},reset,{restored_from}", record.index)?
                    }
                }
            }
        }
        out.flush()
    };
    run().map_err(io_err)
}

/// Per-iteration transport diagnostics, with both the distance and its
/// square, plus the functional estimate and the step sizes used.
pub fn write_diagnostics(path: &Path, trace: &FlowTrace) -> Result<(), CliError> {
    let mut out = writer(path)?;
    let io_err = CliError::io(path);
    let mut run = || -> std::io::Result<()> {
        writeln!(
            out,
            "iteration,w2_nominal_prior,w2sq_nominal_prior,w2_nominal_posterior,\
             w2sq_nominal_posterior,w2_posterior_prior,w2sq_posterior_prior,functional,\
             tau_used,alpha_used"
        )?;
        for r in &trace.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.w2_nominal_prior,
                r.w2_nominal_prior * r.w2_nominal_prior,
                r.w2_nominal_posterior,
                r.w2_nominal_posterior * r.w2_nominal_posterior,
                r.w2_posterior_prior,
                r.w2_posterior_prior * r.w2_posterior_prior,
                r.functional,
                r.tau_used,
                r.alpha_used
            )?;
        }
        out.flush()
    };
    run().map_err(io_err)
}

pub fn write_summary(path: &Path, summary: &RunSummary) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(summary)
        .map_err(|e| CliError::Numeric(format!("summary serialisation: {e}")))?;
    std::fs::write(path, text + "\n").map_err(CliError::io(path))
}

/// One parsed particle-table row.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleRow {
    pub iteration: usize,
    pub role: String,
    pub particle: usize,
    pub theta: Vec<f64>,
}

/// Reads a particle table back; shortest round-trip formatting makes the
/// recovered coordinates bit-exact.
pub fn read_particles(path: &Path) -> Result<Vec<ParticleRow>, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line_no == 0 || line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let parse_field = |field: Option<&str>, what: &str| {
            field.map(str::to_string).ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: missing {what}",
                    path.display(),
                    line_no + 1
                ))
            })
        };
        let iteration = parse_field(fields.next(), "iteration")?
            .parse::<usize>()
            .map_err(|e| CliError::Config(format!("bad iteration: {e}")))?;
        let role = parse_field(fields.next(), "role")?;
        let particle = parse_field(fields.next(), "particle")?
            .parse::<usize>()
            .map_err(|e| CliError::Config(format!("bad particle index: {e}")))?;
        let theta: Result<Vec<f64>, _> = fields.map(|f| f.parse::<f64>()).collect();
        let theta = theta.map_err(|e| CliError::Config(format!("bad coordinate: {e}")))?;
        rows.push(ParticleRow {
            iteration,
            role,
            particle,
            theta,
        });
    }
    Ok(rows)
}

/// FNV-1a over a file, for cheap byte-identity checks.
pub fn file_hash(path: &Path) -> Result<u64, CliError> {
    let bytes = std::fs::read(path).map_err(CliError::io(path))?;
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    Ok(hash)
}

/// Oracle grid table output.
pub fn write_oracle(path: &Path, table: &crate::oracle::OracleTable) -> Result<(), CliError> {
    let mut out = writer(path)?;
    let io_err = CliError::io(path);
    let mut run = || -> std::io::Result<()> {
        writeln!(out, "theta,unnormalized,normalized")?;
        for i in 0..table.grid.len() {
            writeln!(
                out,
                "{},{},{}",
                table.grid[i], table.unnormalized[i], table.normalized[i]
            )?;
        }
        out.flush()
    };
    run().map_err(io_err)
}

pub fn oracle_summary_path(dir: &Path) -> PathBuf {
    dir.join("oracle_summary.json")
}
