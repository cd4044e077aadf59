//! Config-driven experiments, checkpoints and text artifacts.
//!
//! Each experiment writes `summary.json`, `series.csv` and optional `.snls`
//! checkpoints into its output directory. Outputs depend only on the config,
//! so repeated runs are byte-identical.

pub mod checkpoint;
pub mod config;
pub mod output;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::{json, Value};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint};
pub use config::{Experiment, RunConfig};
pub use output::{emit_plot_data, format_f64, to_json_string, write_artifacts, Artifacts, Series};

use crate::diagnostics::{
    decay_ratio, exponents, exponents_permissive, gagliardo_nirenberg_sup_bound, morawetz_report_with,
    MorawetzOptions,
};
use crate::error::{Result, SnlsError};
use crate::nls::{solve, uniform_times, Trajectory, Warning};
use crate::potentials::{centered_difference, check_hypotheses, HypothesisTargets};
use crate::propagators::decay_kernel_bound_free;
use crate::scattering::profiles::fixtures;
use crate::scattering::{
    extract_nonlinear_channels_with, greedy_profile_decomposition, linear_channel_sequence, nonlinear_wave_state_with,
    translation_flow_gap, ProfileOptions, TranslationGapOptions,
};
use crate::spectral::{h1_norm_sq, raw_l2_norm_sq, translate, ComplexField};
use config::ProfileFixture;

/// Validates `cfg` for `experiment`, runs it and writes the artifacts to `out_dir`.
pub fn run(cfg: &RunConfig, experiment: Experiment, out_dir: &Path) -> Result<Value> {
    cfg.validate(experiment)?;
    if experiment == Experiment::Sweep {
        return run_sweep(cfg, out_dir);
    }
    let artifacts = compute(cfg, experiment)?;
    write_artifacts(out_dir, &artifacts)?;
    Ok(artifacts.summary)
}

/// Runs a single (non-sweep) experiment in memory.
pub fn compute(cfg: &RunConfig, experiment: Experiment) -> Result<Artifacts> {
    let mut a = match experiment {
        Experiment::Evolve => evolve(cfg)?,
        Experiment::Channels => channels(cfg)?,
        Experiment::LinearChannels => linear_channels(cfg)?,
        Experiment::Morawetz => morawetz(cfg)?,
        Experiment::Decay => decay(cfg)?,
        Experiment::Profiles => profiles(cfg)?,
        Experiment::TranslationGap => translation_gap(cfg)?,
        Experiment::CheckPotential => check_potential(cfg)?,
        Experiment::Sweep => return Err(SnlsError::Config("sweep cannot run in memory".into())),
    };
    if let Value::Object(map) = &mut a.summary {
        map.insert("experiment".into(), json!(experiment.name()));
        map.insert("config".into(), config_echo(cfg)?);
    }
    Ok(a)
}

fn config_echo(cfg: &RunConfig) -> Result<Value> {
    let mut v = serde_json::to_value(cfg).map_err(|e| SnlsError::Format(e.to_string()))?;
    if let Value::Object(m) = &mut v {
        m.remove("output_dir");
    }
    Ok(v)
}

/// Logs each warning and returns them for the summary.
fn warning_list(w: &[Warning]) -> Value {
    for x in w {
        log::warn!("{x}");
    }
    json!(w)
}

fn norm(f: &ComplexField) -> f64 {
    raw_l2_norm_sq(f).sqrt()
}

fn evolve(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let traj = solve(&cfg.problem(&grid)?)?;
    let mut series = Series::new(&["t", "mass", "energy", "sup_norm", "boundary_fraction", "spectral_tail"]);
    for d in &traj.series {
        series.push_values(&[d.t, d.mass, d.energy, d.sup_norm, d.boundary_fraction, d.spectral_tail]);
    }
    let first = &traj.series[0];
    let last = traj.series.last().expect("at least two snapshots");
    let max_sup = traj.series.iter().map(|d| d.sup_norm).fold(0.0, f64::max);
    let summary = json!({
        "alpha": traj.problem.alpha,
        "linear": traj.problem.linear,
        "exploratory": traj.problem.is_exploratory(),
        "n_snapshots": traj.snapshots.len(),
        "mass_initial": first.mass,
        "mass_final": last.mass,
        "energy_initial": first.energy,
        "energy_final": last.energy,
        "max_relative_mass_drift": traj.max_relative_mass_drift(),
        "max_relative_energy_drift": traj.max_relative_energy_drift(),
        "max_sup_norm": max_sup,
        "gagliardo_nirenberg_bound": gagliardo_nirenberg_sup_bound(first.mass, first.energy),
        "warnings": warning_list(&traj.warnings),
    });
    let mut checkpoints = vec![("final".to_string(), traj.final_snapshot().field.clone(), last.t)];
    if cfg.solver.save_snapshots {
        for (k, s) in traj.snapshots.iter().enumerate() {
            checkpoints.push((format!("snapshot_{k:05}"), s.field.clone(), s.t));
        }
    }
    Ok(Artifacts {
        summary,
        series,
        checkpoints,
    })
}

fn channel_times(cfg: &RunConfig) -> Result<Vec<f64>> {
    let t_final = cfg.solver.t_final.expect("validated");
    let times = cfg.channels.times.clone().unwrap_or_else(|| vec![t_final]);
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SnlsError::Config("channels.times must be non-empty and increasing".into()));
    }
    Ok(times)
}

fn channels(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let times = channel_times(cfg)?;
    let mut cfg_run = cfg.clone();
    let mut record = cfg.solver.record_times.clone().unwrap_or_default();
    record.extend(times.iter().copied());
    cfg_run.solver.record_times = Some(record);
    let traj: Trajectory = solve(&cfg_run.problem(&grid)?)?;
    let p = cfg.propagator(&grid)?;
    let missing = cfg.channels.missing_snapshot;

    let states = times
        .iter()
        .map(|&t| nonlinear_wave_state_with(&traj, &p, t, missing))
        .collect::<Result<Vec<_>>>()?;
    let mut series = Series::new(&["t", "psi_plus_norm", "h1_gap"]);
    let mut gaps = Vec::new();
    for (k, s) in states.iter().enumerate() {
        let gap = if k == 0 {
            None
        } else {
            Some(h1_norm_sq(&s.psi.try_sub(&states[k - 1].psi)?)?.sqrt())
        };
        gaps.extend(gap);
        series.push(vec![Some(s.t), Some(norm(&s.psi)), gap]);
    }
    let t_last = *times.last().expect("non-empty");
    let nl = extract_nonlinear_channels_with(&traj, &p, t_last, cfg.channels.n, missing)?;
    let mut warnings = traj.warnings.clone();
    for s in &states {
        warnings.extend(s.warnings.iter().cloned());
    }
    let summary = json!({
        "alpha": traj.problem.alpha,
        "initial_h1_norm": h1_norm_sq(&traj.problem.u0)?.sqrt(),
        "wave_operator_times": times,
        "wave_operator_h1_gaps": gaps,
        "gaps_decreasing": gaps.windows(2).all(|w| w[1] < w[0]),
        "extraction_time": t_last,
        "extraction_n": cfg.channels.n,
        "eta_norm": nl.pair.eta_norm,
        "gamma_norm": nl.pair.gamma_norm,
        "mass_partition_defect": nl.pair.mass_partition_defect,
        "reconstruction_defect_l2": nl.reconstruction_defect_l2,
        "reconstruction_defect_h1": nl.reconstruction_defect_h1,
        "relative_reconstruction_defect": nl.relative_defect,
        "max_relative_mass_drift": traj.max_relative_mass_drift(),
        "max_relative_energy_drift": traj.max_relative_energy_drift(),
        "warnings": warning_list(&warnings),
    });
    let checkpoints = vec![
        ("psi_plus".to_string(), nl.wave_state.psi.clone(), t_last),
        ("eta".to_string(), nl.pair.eta.clone(), t_last),
        ("gamma".to_string(), nl.pair.gamma.clone(), t_last),
    ];
    Ok(Artifacts {
        summary,
        series,
        checkpoints,
    })
}

fn linear_channels(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let p = cfg.propagator(&grid)?;
    let psi = cfg.initial_field(&grid)?;
    let seq = linear_channel_sequence(&p, &psi, cfg.channels.n)?;
    let mut series = Series::new(&[
        "n",
        "eta_norm",
        "gamma_norm",
        "cauchy_gap",
        "mass_partition_defect",
        "reconstruction_defect",
    ]);
    for c in &seq {
        series.push_values(&[
            c.extraction_n as f64,
            c.eta_norm,
            c.gamma_norm,
            c.cauchy_gap,
            c.mass_partition_defect,
            c.reconstruction_defect,
        ]);
    }
    let last = seq.last().expect("n >= 1");
    let gaps: Vec<f64> = seq.iter().map(|c| c.cauchy_gap).collect();
    let defects: Vec<f64> = seq.iter().map(|c| c.reconstruction_defect).collect();
    let summary = json!({
        "psi_norm": norm(&psi),
        "extraction_n": last.extraction_n,
        "eta_norm": last.eta_norm,
        "gamma_norm": last.gamma_norm,
        "mass_partition_defect": last.mass_partition_defect,
        "cauchy_gap": last.cauchy_gap,
        "reconstruction_defect": last.reconstruction_defect,
        "cauchy_gap_decreasing": gaps.windows(2).all(|w| w[1] < w[0]),
        "reconstruction_defect_decreasing": defects.windows(2).all(|w| w[1] < w[0]),
        "method": p.method().to_string(),
    });
    let t = 2.0 * std::f64::consts::PI * last.extraction_n as f64;
    Ok(Artifacts {
        summary,
        series,
        checkpoints: vec![
            ("eta".to_string(), last.eta.clone(), t),
            ("gamma".to_string(), last.gamma.clone(), t),
        ],
    })
}

fn morawetz(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let traj = solve(&cfg.problem(&grid)?)?;
    let opts = MorawetzOptions {
        time_derivative: cfg.morawetz.time_derivative,
        t_min: cfg.morawetz.t_min,
    };
    let r = morawetz_report_with(&traj, &opts)?;
    let mut series = Series::new(&[
        "t",
        "density",
        "cumulative_density_integral",
        "repulsive_term",
        "identity_residual",
    ]);
    let mut cumulative = 0.0;
    for (k, &t) in r.times.iter().enumerate() {
        if k > 0 {
            cumulative += 0.5 * (t - r.times[k - 1]) * (r.density_series[k] + r.density_series[k - 1]);
        }
        let residual = r
            .residual_times
            .iter()
            .position(|&s| s == t)
            .map(|i| r.identity_residual_series[i]);
        series.push(vec![
            Some(t),
            Some(r.density_series[k]),
            Some(cumulative),
            Some(r.repulsive_term_series[k]),
            residual,
        ]);
    }
    // -x V'(x) on the grid: nonnegative for a repulsive potential
    let xdv: Vec<f64> = grid
        .x()
        .iter()
        .zip(traj.problem.potential.gradient())
        .map(|(x, dv)| -x * dv)
        .collect();
    let (argmin, min_xdv) = xdv
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    let summary = json!({
        "alpha": traj.problem.alpha,
        "linear": traj.problem.linear,
        "t_min": opts.t_min,
        "t_final": traj.final_snapshot().t,
        "integral_value": r.integral_value,
        "max_identity_residual": r.max_residual(),
        "min_repulsive_term": r.repulsive_term_series.iter().copied().fold(f64::INFINITY, f64::min),
        "min_pointwise_repulsivity": min_xdv,
        "min_pointwise_repulsivity_location": grid.x()[argmin],
        "time_derivative": opts.time_derivative,
        "warnings": warning_list(&traj.warnings),
    });
    Ok(Artifacts {
        summary,
        series,
        checkpoints: Vec::new(),
    })
}

fn decay_times(cfg: &RunConfig) -> Result<Vec<f64>> {
    let d = &cfg.decay;
    if let Some(t) = &d.times {
        return Ok(t.clone());
    }
    if !(d.spacing > 0.0) || !(d.t_end > d.t_start) {
        return Err(SnlsError::Config("decay needs t_end > t_start and spacing > 0".into()));
    }
    Ok(uniform_times(d.t_start, d.t_end, d.spacing))
}

fn decay(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let p = cfg.propagator(&grid)?;
    let psi = cfg.initial_field(&grid)?;
    let s = decay_ratio(&p, &psi, &decay_times(cfg)?)?;
    let mut series = Series::new(&["t", "decay_ratio", "boundary_fraction"]);
    for k in 0..s.times.len() {
        series.push_values(&[s.times[k], s.ratios[k], s.boundary_fractions[k]]);
    }
    let bound = decay_kernel_bound_free();
    let summary = json!({
        "max_ratio": s.max_ratio(),
        "free_kernel_bound": bound,
        "within_free_bound": s.max_ratio() <= bound * (1.0 + 1e-3),
        "within_unit_bound": s.max_ratio() <= 1.0,
        "warnings": warning_list(&s.warnings),
    });
    Ok(Artifacts {
        summary,
        series,
        checkpoints: Vec::new(),
    })
}

fn profiles(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let c = &cfg.profiles;
    let psi = cfg.initial_field(&grid)?;
    let count = c.count;
    let shifts = |given: &Option<Vec<f64>>, f: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
        let s = given.clone().unwrap_or_else(|| (0..count).map(|k| f(k as f64)).collect());
        if s.len() != count {
            return Err(SnlsError::Config(format!("expected {count} shifts, got {}", s.len())));
        }
        Ok(s)
    };
    let (family, truth): (Vec<ComplexField>, Vec<ComplexField>) = match c.fixture {
        ProfileFixture::Single => {
            let s = shifts(&c.shifts, &|k| -40.0 + 10.0 * k)?;
            (fixtures::single_profile(&psi, &s)?, vec![psi.clone()])
        }
        ProfileFixture::Two => {
            let s1 = shifts(&c.shifts, &|k| -5.0 * k - 3.0)?;
            let s2 = shifts(&c.shifts2, &|k| 6.0 * k + 9.0)?;
            let (a, w) = (c.amplitude2, c.width2);
            let psi2 = ComplexField::from_real_fn(&grid, |x| a * (-(x / w) * (x / w)).exp())?;
            (fixtures::two_profile(&psi, &psi2, &s1, &s2)?, vec![psi.clone(), psi2])
        }
        ProfileFixture::Noise => (fixtures::random_phase_noise(&grid, count, cfg.seed)?, Vec::new()),
    };
    let p = cfg.propagator(&grid)?;
    let e = if cfg.solver.permissive {
        exponents_permissive(cfg.solver.alpha)?
    } else {
        exponents(cfg.solver.alpha)?
    };
    let opts = ProfileOptions {
        j_max: c.j_max,
        estimator: c.estimator,
        q_exponent: c.q_exponent.unwrap_or(e.q),
        time_window: c.time_window,
        time_spacing: c.time_spacing,
        stop_fraction: c.stop_fraction,
        coherence_threshold: c.coherence_threshold,
        alpha: cfg.solver.alpha,
        ..ProfileOptions::default()
    };
    let set = greedy_profile_decomposition(&family, &p, &opts)?;

    let mut series = Series::new(&["j", "l2_norm", "coherence", "half_sup_ratio", "recovery_error"]);
    let mut errors = Vec::new();
    for (j, prof) in set.profiles.iter().enumerate() {
        let err = best_recovery_error(&prof.psi, &truth)?;
        errors.push(err);
        series.push(vec![
            Some(j as f64),
            Some(prof.l2_norm),
            Some(prof.coherence),
            Some(prof.half_sup_ratio),
            err,
        ]);
    }
    let summary = json!({
        "fixture": c.fixture,
        "family_size": family.len(),
        "n_profiles": set.profiles.len(),
        "concentration_level": set.concentration_level,
        "pythagorean_defects": set.pythagorean_defects,
        "max_remainder_norm": set.max_remainder_norm(),
        "profile_norms": set.profiles.iter().map(|p| p.l2_norm).collect::<Vec<_>>(),
        "recovery_errors": errors,
        "rejected": set.rejected,
        "options": opts,
    });
    let checkpoints = set
        .profiles
        .iter()
        .enumerate()
        .map(|(j, p)| (format!("profile_{j:02}"), p.psi.clone(), 0.0))
        .collect();
    Ok(Artifacts {
        summary,
        series,
        checkpoints,
    })
}

/// Relative L² distance from a recovered profile to the nearest known one,
/// after aligning centres of mass.
fn best_recovery_error(found: &ComplexField, truth: &[ComplexField]) -> Result<Option<f64>> {
    if truth.is_empty() {
        return Ok(None);
    }
    let mut best = f64::INFINITY;
    for t in truth {
        let offset = centre(found) - centre(t);
        let aligned = translate(t, offset)?;
        let d = norm(&found.try_sub(&aligned)?) / norm(t).max(f64::MIN_POSITIVE);
        best = best.min(d);
    }
    Ok(Some(best))
}

fn centre(f: &ComplexField) -> f64 {
    let m = f.modulus_sq();
    let total: f64 = m.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    f.grid().x().iter().zip(&m).map(|(x, w)| x * w).sum::<f64>() / total
}

fn translation_gap(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let p = cfg.propagator(&grid)?;
    let psi = cfg.initial_field(&grid)?;
    let t = &cfg.translation;
    let base = TranslationGapOptions::for_alpha(cfg.solver.alpha)?;
    let opts = TranslationGapOptions {
        sample_spacing: t.sample_spacing,
        ..base
    };
    let gaps = t
        .shifts
        .iter()
        .map(|&x| translation_flow_gap(&p, &psi, x, (t.t_start, t.t_end), &opts))
        .collect::<Result<Vec<f64>>>()?;
    let mut series = Series::new(&["x_shift", "gap"]);
    for (x, g) in t.shifts.iter().zip(&gaps) {
        series.push_values(&[*x, *g]);
    }
    let side_decreasing = |sign: f64| {
        let mut pts: Vec<(f64, f64)> = t
            .shifts
            .iter()
            .zip(&gaps)
            .filter(|(x, _)| **x * sign > 0.0)
            .map(|(x, g)| (x.abs(), *g))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.windows(2).all(|w| w[1].1 < w[0].1)
    };
    let summary = json!({
        "time_exponent": opts.time_exponent,
        "space_exponent": opts.space_exponent,
        "shifts": t.shifts,
        "gaps": gaps,
        "left_decreasing": side_decreasing(-1.0),
        "right_decreasing": side_decreasing(1.0),
    });
    Ok(Artifacts {
        summary,
        series,
        checkpoints: Vec::new(),
    })
}

fn check_potential(cfg: &RunConfig) -> Result<Artifacts> {
    let grid = cfg.grid()?;
    let spec = cfg.potential_spec()?;
    let v = cfg.potential(&grid)?;
    let targets = HypothesisTargets {
        a_minus: cfg.potential.a_minus.unwrap_or(0.0),
        a_plus: cfg.potential.a_plus.unwrap_or(1.0),
        ..HypothesisTargets::default()
    };
    let report = check_hypotheses(v.values(), &grid, &targets);
    let dv = centered_difference(v.values(), grid.dx());
    let mut series = Series::new(&["x", "v", "dv", "x_dv"]);
    for (j, &x) in grid.x().iter().enumerate() {
        series.push_values(&[x, v.values()[j], dv[j], x * dv[j]]);
    }
    let summary = json!({
        "family": spec.family,
        "all_ok": report.all_ok(),
        "report": report,
    });
    Ok(Artifacts {
        summary,
        series,
        checkpoints: Vec::new(),
    })
}

fn run_sweep(cfg: &RunConfig, out_dir: &Path) -> Result<Value> {
    let sweep = cfg.sweep.as_ref().expect("validated");
    fs::create_dir_all(out_dir)?;
    let outcomes: Vec<(i32, Option<String>)> = sweep
        .values
        .par_iter()
        .enumerate()
        .map(|(k, value)| {
            let dir = out_dir.join(format!("run_{k:03}"));
            let result = cfg
                .with_override(&sweep.parameter, value.clone(), sweep.experiment)
                .and_then(|c| run(&c, sweep.experiment, &dir));
            match result {
                Ok(_) => (0, None),
                Err(e) => {
                    let _ = fs::create_dir_all(&dir);
                    let _ = fs::write(dir.join("error.json"), error_json(&e));
                    (e.exit_code(), Some(e.to_string()))
                }
            }
        })
        .collect();
    let mut series = Series::new(&["index", "value", "exit_code"]);
    for (k, (code, _)) in outcomes.iter().enumerate() {
        let numeric = match &sweep.values[k] {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        };
        series.push(vec![Some(k as f64), numeric, Some(*code as f64)]);
    }
    let summary = json!({
        "experiment": "sweep",
        "swept_experiment": sweep.experiment,
        "parameter": sweep.parameter,
        "values": sweep.values,
        "runs": outcomes.iter().enumerate().map(|(k, (code, msg))| json!({
            "dir": format!("run_{k:03}"),
            "exit_code": code,
            "error": msg,
        })).collect::<Vec<_>>(),
        "n_failed": outcomes.iter().filter(|o| o.0 != 0).count(),
    });
    write_artifacts(
        out_dir,
        &Artifacts {
            summary: summary.clone(),
            series,
            checkpoints: Vec::new(),
        },
    )?;
    if let Some((k, (code, Some(msg)))) = outcomes.iter().enumerate().find(|(_, o)| o.0 != 0) {
        let msg = format!("sweep run {k} failed: {msg}");
        return Err(match code {
            3 => SnlsError::Instability(msg),
            4 => SnlsError::Format(msg),
            _ => SnlsError::Config(msg),
        });
    }
    Ok(summary)
}

/// Machine-readable error record, as printed on stderr by the CLI.
pub fn error_json(e: &SnlsError) -> String {
    let v = json!({
        "error": e.kind(),
        "message": e.to_string(),
        "exit_code": e.exit_code(),
    });
    serde_json::to_string(&v).expect("plain JSON value")
}
