//! `run`: one experiment from a scenario config, written to CSV and JSON.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::Array1;
use serde::Serialize;

use gaugekit::circuit::CircuitModel;
use gaugekit::dipole::DipoleModel;
use gaugekit::gauge::{model_hamiltonian, GaugeModel, Variant};
use gaugekit::lineshape::{
    calibrate_kick, closed_form_spectrum, default_emission_dt, numerical_spectrum,
    simulate_emission, sudden_switch_class_run, EmitterSpec, Spectrum,
};
use gaugekit::operator::{ground_state, Operator};
use gaugekit::propagation::{fidelity, propagate, PropagationOptions, Trajectory};
use gaugekit::{Execution, C64};

use crate::config::{Experiment, ScenarioConfig};
use crate::error::CliError;
use crate::output::{alpha_tag, write_json, Table};

/// Largest `|‖ψ‖ - 1|` tolerated in a run before it is reported as an invariant failure.
pub const NORM_LIMIT: f64 = 1e-8;

pub fn run(config: &ScenarioConfig, out: &Path) -> Result<serde_json::Value, CliError> {
    match config.experiment {
        Experiment::Circuit => {
            let spec = config.circuit_spec()?;
            let model = CircuitModel::new(spec)?;
            let p_norm = model.momentum().op_norm()?;
            let flux = model.spec().flux.clone();
            let observables = vec![
                ("q".to_string(), model.position()),
                ("p".to_string(), model.momentum().clone()),
            ];
            let setup = GaugeSetup {
                model: Arc::new(model),
                generator_norm: p_norm,
                rate: Box::new(move |t| flux.derivative(t)),
                observables,
            };
            run_gauge_experiment(config, &setup, out)
        }
        Experiment::Dipole => {
            let spec = config.dipole_spec()?;
            let model = DipoleModel::new(spec)?;
            let coupling_norm = model.coupling_operator().op_norm()?;
            let (x, field_x) = model.position_operators()?;
            let mu = model.spec().mu.clone();
            let charge = model.spec().charge;
            let setup = GaugeSetup {
                model: Arc::new(model),
                generator_norm: coupling_norm,
                rate: Box::new(move |t| charge * mu.derivative(t)),
                observables: vec![("x".to_string(), x), ("field_x".to_string(), field_x)],
            };
            run_gauge_experiment(config, &setup, out)
        }
        Experiment::Lineshape => run_lineshape(config, out),
        Experiment::Verify => Err(CliError::config(
            "experiment",
            "\"verify\" configs are run with the `verify` subcommand",
        )),
    }
}

/// A gauge family together with the data needed to predict its correction norm,
/// `‖X_α(t)‖ = |α - α_irr| · |rate(t)| · generator_norm`.
pub struct GaugeSetup {
    pub model: Arc<dyn GaugeModel>,
    pub generator_norm: f64,
    pub rate: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub observables: Vec<(String, Operator)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeRow {
    pub alpha: f64,
    pub residual: f64,
    pub predicted: f64,
    pub fidelity_naive: f64,
    pub fidelity_correct: f64,
    pub max_norm_drift: f64,
}

#[derive(Debug, Serialize)]
struct GaugeSummary<'a> {
    experiment: &'static str,
    alpha_irr: f64,
    reference_alpha: f64,
    gauge_list: &'a [f64],
    t0: f64,
    t1: f64,
    dt: f64,
    steps: usize,
    dim: usize,
    rows: &'a [GaugeRow],
    files: Vec<String>,
}

/// Residual samples `t_i = t0 + (i + ½)(t1 - t0)/n`.
pub fn sample_times(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t0 + (i as f64 + 0.5) * (t1 - t0) / n as f64)
        .collect()
}

/// Ground state of the naive Hamiltonian in the irrotational gauge at `t0`.
pub fn reference_state(model: &dyn GaugeModel, t0: f64) -> Result<Array1<C64>, CliError> {
    Ok(ground_state(&model.naive(model.irrotational_alpha(), t0))?.1)
}

struct GaugeOutcome {
    row: GaugeRow,
    trajectory: Trajectory,
}

/// Residual, frame-mapped fidelities against the irrotational reference and a
/// recorded correct-theory trajectory, for every gauge in the list.
fn gauge_sweep(
    config: &ScenarioConfig,
    setup: &GaugeSetup,
    exec: Execution,
) -> Result<(f64, Vec<GaugeOutcome>), CliError> {
    let model = setup.model.clone();
    let (t0, t1) = config.window();
    let alpha_irr = model.irrotational_alpha();
    let psi0 = reference_state(model.as_ref(), t0)?;
    let base = PropagationOptions::new(config.dt()).method(config.numerics.method);
    let reference_h = model_hamiltonian(model.clone(), Variant::Naive, alpha_irr)?;
    let reference = propagate(&reference_h, &psi0, t0, t1, &base.clone().final_state_only())?;
    check_norm(reference.max_norm_drift, alpha_irr)?;
    let samples = sample_times(t0, t1, config.numerics.residual_samples);
    let max_rate = samples
        .iter()
        .map(|&t| (setup.rate)(t).abs())
        .fold(0.0, f64::max);

    let mut recorded = base.clone().record_every(config.numerics.record_every);
    for (name, op) in &setup.observables {
        recorded = recorded.observe(name.clone(), op.clone());
    }

    let outcomes = exec.try_map(&config.gauges(), |&alpha| {
        let mut residual = 0.0_f64;
        for &t in &samples {
            let gap = model.correct(alpha, t).try_sub(&model.naive(alpha, t))?;
            residual = residual.max(gap.op_norm()?);
        }
        let predicted = (alpha - alpha_irr).abs() * max_rate * setup.generator_norm;

        let start = model.frame_unitary(alpha_irr, alpha, t0)?.apply(&psi0);
        let mapped = model.frame_unitary(alpha_irr, alpha, t1)?.apply(reference.final_state());
        let h_correct = model_hamiltonian(model.clone(), Variant::Correct, alpha)?;
        let h_naive = model_hamiltonian(model.clone(), Variant::Naive, alpha)?;
        let trajectory = propagate(&h_correct, &start, t0, t1, &recorded)?;
        let naive = propagate(&h_naive, &start, t0, t1, &base.clone().final_state_only())?;
        let drift = trajectory.max_norm_drift.max(naive.max_norm_drift);
        check_norm(drift, alpha)?;
        Ok::<_, CliError>(GaugeOutcome {
            row: GaugeRow {
                alpha,
                residual,
                predicted,
                fidelity_naive: fidelity(&mapped, naive.final_state()),
                fidelity_correct: fidelity(&mapped, trajectory.final_state()),
                max_norm_drift: drift,
            },
            trajectory,
        })
    })?;
    Ok((alpha_irr, outcomes))
}

fn check_norm(drift: f64, alpha: f64) -> Result<(), CliError> {
    if drift > NORM_LIMIT {
        return Err(CliError::Invariant(format!(
            "norm drift {drift:.3e} at α = {alpha} exceeds {NORM_LIMIT:.0e}"
        )));
    }
    Ok(())
}

fn run_gauge_experiment(
    config: &ScenarioConfig,
    setup: &GaugeSetup,
    out: &Path,
) -> Result<serde_json::Value, CliError> {
    let (alpha_irr, outcomes) = gauge_sweep(config, setup, config.numerics.execution)?;
    let mut files = Vec::new();

    let mut residuals = Table::new(["alpha", "residual", "predicted"]);
    let mut fidelities = Table::new(["alpha", "fidelity_naive", "fidelity_correct"]);
    for o in &outcomes {
        residuals.push(vec![o.row.alpha, o.row.residual, o.row.predicted]);
        fidelities.push(vec![o.row.alpha, o.row.fidelity_naive, o.row.fidelity_correct]);
    }
    residuals.write(&out.join("residual_vs_alpha.csv"))?;
    fidelities.write(&out.join("fidelity_vs_alpha.csv"))?;
    files.push("residual_vs_alpha.csv".to_string());
    files.push("fidelity_vs_alpha.csv".to_string());

    for o in &outcomes {
        let name = format!("trajectory_alpha_{}.csv", alpha_tag(o.row.alpha));
        trajectory_table(&o.trajectory).write(&out.join(&name))?;
        files.push(name);
    }

    let rows: Vec<GaugeRow> = outcomes.iter().map(|o| o.row.clone()).collect();
    let (t0, t1) = config.window();
    let summary = GaugeSummary {
        experiment: match config.experiment {
            Experiment::Dipole => "dipole",
            _ => "circuit",
        },
        alpha_irr,
        reference_alpha: alpha_irr,
        gauge_list: &config.gauges(),
        t0,
        t1,
        dt: config.dt(),
        steps: outcomes.first().map_or(0, |o| o.trajectory.steps),
        dim: setup.model.dim(),
        rows: &rows,
        files,
    };
    let value = serde_json::to_value(&summary).expect("summary serializes");
    write_json(&out.join("summary.json"), &value)?;
    Ok(value)
}

/// Columns `t, norm`, then one per observable.
pub fn trajectory_table(traj: &Trajectory) -> Table {
    let mut header = vec!["t".to_string(), "norm".to_string()];
    header.extend(traj.expectations.iter().map(|(n, _)| n.clone()));
    let mut table = Table::new(header);
    for (i, (&t, &n)) in traj.times.iter().zip(&traj.norms).enumerate() {
        let mut row = vec![t, n];
        row.extend(traj.expectations.iter().map(|(_, v)| v[i]));
        table.push(row);
    }
    table
}

#[derive(Clone, Debug, Serialize)]
pub struct LineshapeRow {
    pub alpha: f64,
    /// Max relative deviation from the closed form over `ω_eg ± 5Γ`.
    pub max_relative_deviation: f64,
    /// `S_num(ω_eg) / (2/(πΓ))`.
    pub peak_ratio: f64,
    /// Max relative deviation of the kicked run from `S_0`, when requested.
    pub class_deviation: Option<f64>,
}

#[derive(Debug, Serialize)]
struct LineshapeSummary<'a> {
    experiment: &'static str,
    gamma: f64,
    omega_eg: f64,
    n_modes: usize,
    delta_omega: f64,
    dt: f64,
    t_final: f64,
    kick_phase: Option<String>,
    kick_deviations: Option<BTreeMap<String, f64>>,
    rows: &'a [LineshapeRow],
    files: Vec<String>,
}

fn spectrum_table(numerical: &Spectrum, closed: &Spectrum, alpha: f64) -> Table {
    let mut table = Table::new(["omega", "S_closed", "S_numerical", "gauge_alpha"]);
    for ((&w, &c), &s) in numerical.omega.iter().zip(&closed.values).zip(&numerical.values) {
        table.push(vec![w, c, s, alpha]);
    }
    table
}

fn run_lineshape(config: &ScenarioConfig, out: &Path) -> Result<serde_json::Value, CliError> {
    let block = config.lineshape_block();
    let grid = config.mode_grid()?;
    let omega_eg = block.omega_eg;
    let gamma = block.gamma_ratio * omega_eg;
    let dt = block.dt.unwrap_or_else(|| default_emission_dt(&grid, omega_eg));
    let t_final = block.t_decay / gamma;
    let freqs = grid.frequencies();
    let exec = config.numerics.execution;
    let gauges = config.gauges();
    let peak = 2.0 / (std::f64::consts::PI * gamma);

    let spectra = exec.try_map(&gauges, |&alpha| {
        let spec = EmitterSpec::with_gamma(omega_eg, gamma, alpha, &grid);
        spec.validate(&grid)?;
        let state = simulate_emission(&spec, &grid, t_final, dt)?;
        let numerical = numerical_spectrum(&state, &grid, omega_eg, alpha)?;
        let closed = closed_form_spectrum(alpha, &freqs, omega_eg, gamma)?;
        let deviation = numerical.max_relative_deviation(&closed, omega_eg, 5.0 * gamma)?;
        Ok::<_, CliError>((numerical, closed, deviation))
    })?;

    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (&alpha, (numerical, closed, deviation)) in gauges.iter().zip(&spectra) {
        let name = format!("spectrum_alpha_{}.csv", alpha_tag(alpha));
        spectrum_table(numerical, closed, alpha).write(&out.join(&name))?;
        files.push(name);
        rows.push(LineshapeRow {
            alpha,
            max_relative_deviation: *deviation,
            peak_ratio: numerical.value_near(omega_eg) / peak,
            class_deviation: None,
        });
    }

    let (mut kick_phase, mut kick_deviations) = (None, None);
    if block.sudden_switch {
        let g0 = EmitterSpec::with_gamma(omega_eg, gamma, 0.0, &grid).g0;
        let calibration = calibrate_kick(omega_eg, g0, 1.0, &grid, t_final, dt, exec)?;
        let reference = closed_form_spectrum(0.0, &freqs, omega_eg, gamma)?;
        let kicked = exec.try_map(&gauges, |&alpha| {
            let spec = EmitterSpec { omega_eg, g0, alpha };
            sudden_switch_class_run(&spec, &grid, t_final, dt, calibration.phase)
        })?;
        for ((&alpha, spectrum), row) in gauges.iter().zip(&kicked).zip(rows.iter_mut()) {
            let name = format!("kicked_spectrum_alpha_{}.csv", alpha_tag(alpha));
            spectrum_table(spectrum, &reference, alpha).write(&out.join(&name))?;
            files.push(name);
            row.class_deviation =
                Some(spectrum.max_relative_deviation(&reference, omega_eg, 5.0 * gamma)?);
        }
        kick_phase = Some(calibration.phase.to_string());
        kick_deviations = Some(
            calibration
                .deviations
                .iter()
                .map(|(p, d)| (p.to_string(), *d))
                .collect(),
        );
    }

    let summary = LineshapeSummary {
        experiment: "lineshape",
        gamma,
        omega_eg,
        n_modes: grid.n_modes,
        delta_omega: grid.spacing(),
        dt,
        t_final,
        kick_phase,
        kick_deviations,
        rows: &rows,
        files,
    };
    let value = serde_json::to_value(&summary).expect("summary serializes");
    write_json(&out.join("summary.json"), &value)?;
    Ok(value)
}
