//! End-to-end checks of the run pipeline: persisted tables reconstruct the
//! logged diagnostics, the bundled case behaviours hold, the external-model
//! protocol works, and the binary reports categorised exit codes.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::Command;

use wgflow::ensemble::{
    kde_log_density, median_bandwidth, EnsembleRole, KernelConfig, ParticleEnsemble,
};
use wgflow::linalg::Mat;
use wgflow::transport::w2_distance;

use wgflow_cli::config::{parse_config, ModeConfig};
use wgflow_cli::output::{read_particles, DIAGNOSTICS_FILE, PARTICLES_FILE};
use wgflow_cli::runner::{execute_run, resolve, Overrides, RunOutcome};

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("wgflow-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn run_mass_spring(dir: &PathBuf, mode: ModeConfig, seed: u64, n_max: usize) -> RunOutcome {
    let text = format!(
        r#"{{"model": {{"id": "mass_spring"}}, "ambiguity_radius": 0.005, "seed": {seed},
            "flow": {{"n_max": {n_max}}}}}"#
    );
    let config = parse_config(&text).unwrap();
    let resolved = resolve(
        &config,
        Overrides {
            mode: Some(mode),
            seed: None,
            output_dir: Some(dir),
        },
    )
    .unwrap();
    execute_run(&resolved).unwrap()
}

#[test]
fn particle_table_reconstructs_logged_distances() {
    let dir = temp_dir("reconstruct");
    let outcome = run_mass_spring(&dir, ModeConfig::Optimal, 9, 70);

    let rows = read_particles(&dir.join(PARTICLES_FILE)).unwrap();
    let mut by_key: BTreeMap<(usize, String), Vec<(usize, Vec<f64>)>> = BTreeMap::new();
    for row in rows {
        by_key
            .entry((row.iteration, row.role.clone()))
            .or_default()
            .push((row.particle, row.theta));
    }
    let ensemble_of = |iteration: usize, role: &str| -> ParticleEnsemble {
        let mut rows = by_key
            .get(&(iteration, role.to_string()))
            .unwrap_or_else(|| panic!("missing {role} at iteration {iteration}"))
            .clone();
        rows.sort_by_key(|(index, _)| *index);
        let d = rows[0].1.len();
        let coords: Vec<f64> = rows.iter().flat_map(|(_, theta)| theta.clone()).collect();
        ParticleEnsemble::new(coords, rows.len(), d, EnsembleRole::Prior).unwrap()
    };

    let nominal = ensemble_of(0, "nominal");
    let diagnostics = std::fs::read_to_string(dir.join(DIAGNOSTICS_FILE)).unwrap();
    for (line_no, line) in diagnostics.lines().enumerate() {
        if line_no == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let iteration: usize = fields[0].parse().unwrap();
        let logged: f64 = fields[1].parse().unwrap();
        let prior = ensemble_of(iteration, "prior");
        let (recomputed, _) = w2_distance(&nominal, &prior).unwrap();
        assert!(
            (recomputed - logged).abs() < 1e-9,
            "iteration {iteration}: recomputed {recomputed} vs logged {logged}"
        );
    }
    assert_eq!(outcome.trace.records.len(), 70);
    let _ = std::fs::remove_dir_all(&dir);
}

/// KDE mode of a 1-D sample set over a fine grid.
fn kde_mode(values: &ParticleEnsemble) -> f64 {
    let h = median_bandwidth(values).unwrap();
    let kernel = KernelConfig::normalized(h).unwrap();
    let lo = values.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = values
        .iter()
        .map(|p| p[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let m = 1001;
    let grid: Vec<f64> = (0..m)
        .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
        .collect();
    let density = kde_log_density(&Mat::from_rows(m, 1, &grid), values, &kernel).unwrap();
    let mut best = 0;
    for (i, v) in density.iter().enumerate() {
        if *v > density[best] {
            best = i;
        }
    }
    grid[best]
}

#[test]
fn mass_spring_mode_ordering_matches_the_case_study() {
    let dir_opt = temp_dir("mode-opt");
    let optimal = run_mass_spring(&dir_opt, ModeConfig::Optimal, 3, 400);
    let dir_worst = temp_dir("mode-worst");
    let worst = run_mass_spring(&dir_worst, ModeConfig::WorstCase, 3, 400);

    let nominal_mode = kde_mode(&optimal.trace.nominal);
    let last_opt = optimal.trace.records.last().unwrap();
    let last_worst = worst.trace.records.last().unwrap();
    let posterior_mode = kde_mode(&last_opt.posterior);

    // The optimal prior's mode moves towards the posterior mode relative to
    // the nominal prior's mode; the worst-case prior's moves away.
    let gap = |mode: f64| (mode - posterior_mode).abs();
    let optimal_gap = gap(kde_mode(&last_opt.prior));
    let nominal_gap = gap(nominal_mode);
    let worst_gap = gap(kde_mode(&last_worst.prior));
    assert!(
        optimal_gap < nominal_gap,
        "optimal prior mode gap {optimal_gap} vs nominal {nominal_gap}"
    );
    assert!(
        worst_gap > nominal_gap,
        "worst-case prior mode gap {worst_gap} vs nominal {nominal_gap}"
    );

    // Mean distance from final prior to final posterior particles: the
    // worst-case run exceeds the optimal run by a strictly positive margin.
    let mean_distance = |prior: &ParticleEnsemble, posterior: &ParticleEnsemble| {
        let mut total = 0.0;
        for p in prior.iter() {
            let mut nearest = f64::INFINITY;
            for q in posterior.iter() {
                let d = (p[0] - q[0]).abs();
                if d < nearest {
                    nearest = d;
                }
            }
            total += nearest;
        }
        total / prior.len() as f64
    };
    let opt_distance = mean_distance(&last_opt.prior, &last_opt.posterior);
    let worst_distance = mean_distance(&last_worst.prior, &last_worst.posterior);
    assert!(
        worst_distance > opt_distance,
        "worst {worst_distance} vs optimal {opt_distance}"
    );

    let _ = std::fs::remove_dir_all(&dir_opt);
    let _ = std::fs::remove_dir_all(&dir_worst);
}

#[test]
fn external_model_round_trip() {
    // A shell script implementing y = 2θ.
    let dir = temp_dir("external");
    std::fs::create_dir_all(&dir).unwrap();
    let script = dir.join("double.sh");
    {
        let mut f = std::fs::File::create(&script).unwrap();
        writeln!(f, "#!/bin/sh").unwrap();
        writeln!(f, "awk \"BEGIN {{ print 2 * $1 }}\"").unwrap();
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(&script, std::fs::Permissions::from_mode(0o755)).unwrap();
    }

    let text = format!(
        r#"{{
            "model": {{"id": "external",
                       "external": {{"command": "{}", "dimension": 1, "output_size": 1}}}},
            "ambiguity_radius": 0.05,
            "seed": 4,
            "nominal_prior": {{"mean": [1.0], "variances": [0.05]}},
            "observation": {{"source": "literal", "values": [2.0]}},
            "likelihood_std": [0.2],
            "flow": {{"n0": 16, "na": 4, "n_max": 8}}
        }}"#,
        script.display()
    );
    let config = parse_config(&text).unwrap();
    let resolved = resolve(
        &config,
        Overrides {
            mode: None,
            seed: None,
            output_dir: Some(&dir.join("run")),
        },
    )
    .unwrap();
    let outcome = execute_run(&resolved).unwrap();
    assert_eq!(outcome.trace.records.len(), 8);
    // The posterior drifts towards θ = 1 where 2θ matches the observation.
    let first = outcome.trace.records.first().unwrap();
    let last = outcome.trace.records.last().unwrap();
    let mean = |e: &ParticleEnsemble| e.iter().map(|p| p[0]).sum::<f64>() / e.len() as f64;
    assert!((mean(&last.posterior) - 1.0).abs() <= (mean(&first.posterior) - 1.0).abs() + 1e-9);
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn failed_first_iteration_emits_no_summary() {
    // A prior centred deep in the invalid domain fails at iteration 0: no
    // records, so no summary document is flushed.
    let dir = temp_dir("failfast");
    let text = r#"{
        "model": {"id": "mass_spring"},
        "ambiguity_radius": 0.005,
        "seed": 6,
        "nominal_prior": {"mean": [-5.0], "variances": [0.01]},
        "flow": {"n0": 16, "na": 4, "n_max": 8}
    }"#;
    let config = parse_config(text).unwrap();
    let resolved = resolve(
        &config,
        Overrides {
            mode: None,
            seed: None,
            output_dir: Some(&dir),
        },
    )
    .unwrap();
    let err = match execute_run(&resolved) {
        Err(e) => e,
        Ok(_) => panic!("run succeeded on an invalid prior"),
    };
    assert_eq!(err.exit_code(), 5, "model-failure category: {err}");
    assert!(!dir.join("summary.json").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn binary_exit_codes_follow_error_categories() {
    let binary = env!("CARGO_BIN_EXE_wgflow");
    let dir = temp_dir("exitcodes");
    std::fs::create_dir_all(&dir).unwrap();

    // Valid config validates with exit 0.
    let good = dir.join("good.json");
    std::fs::write(
        &good,
        r#"{"model": {"id": "mass_spring"}, "ambiguity_radius": 0.005, "seed": 1}"#,
    )
    .unwrap();
    let status = Command::new(binary)
        .args(["validate", "--config"])
        .arg(&good)
        .output()
        .unwrap();
    assert!(status.status.success(), "{status:?}");

    // Unknown field: config error, exit 2, field named.
    let bad = dir.join("bad.json");
    std::fs::write(
        &bad,
        r#"{"model": {"id": "mass_spring"}, "ambiguity_radius": 0.005, "seed": 1, "NmaxTypo": 3}"#,
    )
    .unwrap();
    let output = Command::new(binary)
        .args(["validate", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("NmaxTypo"));

    // Missing file: io error, exit 3.
    let output = Command::new(binary)
        .args(["validate", "--config"])
        .arg(dir.join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));

    let _ = std::fs::remove_dir_all(&dir);
}
