//! `verify`: every module's invariants at desk-scale parameters, one measured
//! value and threshold per check.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

use serde::Serialize;

use gaugekit::circuit::{branch_fluxes, build_reduction, CircuitModel, CircuitSpec};
use gaugekit::dipole::{DipoleModel, DipoleSpec};
use gaugekit::drive::DriveSignal;
use gaugekit::gauge::{
    transform, verify_frame_map, GaugeChoice, GaugeModel, GeneratorRecipe, Label, Profile,
    TimeDependentHamiltonian, Variant,
};
use gaugekit::lineshape::{
    calibrate_kick, closed_form_spectrum, default_emission_dt, numerical_spectrum,
    simulate_emission, sudden_switch_class_run, EmitterSpec, ModeGrid,
};
use gaugekit::operator::{
    ground_state, ladder_operators, momentum_operator, position_operator, tensor,
    translation_unitary, BasisTag, FockBasis, GridBasis, Operator,
};
use gaugekit::propagation::{propagate, Method, PropagationOptions};
use gaugekit::{Execution, C64};

use crate::config::ScenarioConfig;
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub passed: bool,
    pub skip_correction: bool,
    pub gauge_list: Vec<f64>,
    pub checks: Vec<Check>,
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn at_most(&mut self, module: &'static str, name: &'static str, measured: f64, threshold: f64) {
        self.push(module, name, measured, threshold, Relation::AtMost);
    }

    fn at_least(&mut self, module: &'static str, name: &'static str, measured: f64, threshold: f64) {
        self.push(module, name, measured, threshold, Relation::AtLeast);
    }

    fn push(&mut self, module: &'static str, name: &'static str, measured: f64, threshold: f64, relation: Relation) {
        let passed = match relation {
            Relation::AtMost => measured <= threshold,
            Relation::AtLeast => measured >= threshold,
        };
        self.checks.push(Check {
            module,
            name,
            measured,
            threshold,
            relation,
            passed,
        });
    }
}

/// Model whose "correct" Hamiltonian silently drops `X_α`; exists to prove the
/// covariance checks can fail.
struct WithoutCorrection(Arc<dyn GaugeModel>);

impl GaugeModel for WithoutCorrection {
    fn tag(&self) -> BasisTag {
        self.0.tag()
    }

    fn naive(&self, alpha: f64, t: f64) -> Operator {
        self.0.naive(alpha, t)
    }

    fn correction(&self, _alpha: f64, _t: f64) -> Operator {
        Operator::zeros(self.0.tag())
    }

    fn frame_recipe(&self, alpha: f64, alpha_prime: f64) -> gaugekit::Result<GeneratorRecipe> {
        self.0.frame_recipe(alpha, alpha_prime)
    }

    fn frame_unitary(&self, alpha: f64, alpha_prime: f64, t: f64) -> gaugekit::Result<Operator> {
        self.0.frame_unitary(alpha, alpha_prime, t)
    }

    fn irrotational_alpha(&self) -> f64 {
        self.0.irrotational_alpha()
    }
}

fn under_test(model: Arc<dyn GaugeModel>, skip_correction: bool) -> Arc<dyn GaugeModel> {
    if skip_correction {
        Arc::new(WithoutCorrection(model))
    } else {
        model
    }
}

pub fn verify(config: &ScenarioConfig) -> Result<Report, CliError> {
    let gauges = config.gauges();
    let exec = config.numerics.execution;
    let skip = config.verify.skip_correction;
    let mut suite = Suite { checks: Vec::new() };

    operator_checks(&mut suite)?;
    drive_checks(&mut suite);
    circuit_checks(&mut suite, &gauges, skip, exec)?;
    dipole_checks(&mut suite, &gauges, skip, exec)?;
    gauge_checks(&mut suite)?;
    propagation_checks(&mut suite)?;
    lineshape_checks(&mut suite, &gauges, exec)?;

    Ok(Report {
        passed: suite.checks.iter().all(|c| c.passed),
        skip_correction: skip,
        gauge_list: gauges,
        checks: suite.checks,
    })
}

fn max_abs_diff(a: &ndarray::Array1<C64>, b: &ndarray::Array1<C64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn operator_checks(suite: &mut Suite) -> Result<(), CliError> {
    let basis = GridBasis::new(256, 10.0)?;
    let q = position_operator(&basis);
    let p = momentum_operator(&basis);
    let psi = basis.gaussian(0.0, 0.5, 0.0);
    let comm = q.commutator(&p)?.expectation(&psi);
    suite.at_most("operator-core", "grid_commutator_deviation", (comm - C64::new(0.0, 1.0)).norm(), 1e-6);

    let c = 1.3;
    let u = translation_unitary(&basis, c);
    suite.at_most("operator-core", "translation_unitarity", u.unitarity_deviation(), 1e-12);
    let shifted = u.apply(&psi);
    let q_shift = q.expectation(&shifted).re - q.expectation(&psi).re;
    suite.at_most("operator-core", "translation_shift_error", (q_shift + c).abs(), 1e-8);

    let fock = FockBasis::new(20, 1.0, 1.0)?;
    let (_, x, px) = ladder_operators(&fock)?;
    let ccr = x.commutator(&px)?;
    let mut worst = 0.0_f64;
    for i in 0..fock.dim - 1 {
        for j in 0..fock.dim - 1 {
            let target = if i == j { C64::new(0.0, 1.0) } else { C64::new(0.0, 0.0) };
            worst = worst.max((ccr.matrix()[[i, j]] - target).norm());
        }
    }
    suite.at_most("operator-core", "fock_commutator_low_block", worst, 1e-12);
    suite.at_most(
        "operator-core",
        "fock_ground_variance_error",
        ((&x * &x).expectation(&fock.number_state(0)).re - 0.5).abs(),
        1e-14,
    );
    Ok(())
}

fn drive_checks(suite: &mut Suite) {
    let signals = [
        DriveSignal::constant(0.7),
        DriveSignal::linear_ramp(1.0, 0.2),
        DriveSignal::smooth_step(1.5),
        DriveSignal::sinusoid(0.4, 1.0),
        DriveSignal::gaussian_pulse(1.0, 2.0),
    ];
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for sig in &signals {
        for i in 0..100 {
            let t = -5.0 + 10.0 * i as f64 / 99.0;
            let d = sig.derivative(t);
            let fd = (sig.value(t + h) - sig.value(t - h)) / (2.0 * h);
            worst = worst.max((d - fd).abs() / (1.0 + d.abs()));
        }
    }
    suite.at_most("drive-signals", "derivative_vs_finite_difference", worst, 1e-6);
}

fn circuit_model(flux: DriveSignal) -> Result<CircuitModel, CliError> {
    Ok(CircuitModel::new(CircuitSpec {
        c0: 3.0,
        c1: 1.0,
        ej0: 1.0,
        ej1: 1.0,
        flux,
        basis: GridBasis::new(128, 4.0 * PI)?,
    })?)
}

fn circuit_checks(suite: &mut Suite, gauges: &[f64], skip: bool, exec: Execution) -> Result<(), CliError> {
    let mut sum_err = 0.0_f64;
    for (q, phi, alpha) in [(0.3, 0.7, 0.25), (-12.5, 3.1, 1.0), (40.0, -8.0, 0.6)] {
        let (x0, x1) = branch_fluxes(q, phi, alpha);
        let scale = q.abs().max(phi.abs()).max((alpha * phi).abs());
        sum_err = sum_err.max((x0 + x1 - phi).abs() / (f64::EPSILON * scale));
    }
    suite.at_most("circuit-model", "branch_flux_sum_ulps", sum_err, 4.0);
    suite.at_most("circuit-model", "reduction_determinant_error", (build_reduction(0.4).det() + 1.0).abs(), 1e-14);

    let model = circuit_model(DriveSignal::sinusoid(0.4, 1.0))?;
    let irr = model.irrotational_alpha();
    suite.at_most("circuit-model", "irrotational_alpha_error", (irr - 0.25).abs(), 0.0);
    suite.at_most("circuit-model", "correction_at_irrotational_gauge", model.correction_x(irr, 0.7).max_abs(), 0.0);

    let p_norm = model.momentum().op_norm()?;
    let t = 0.7;
    let rate = model.spec().flux.derivative(t).abs();
    let errors = exec.try_map(gauges, |&alpha| {
        let res = model.hamiltonian_correct(alpha, t).try_sub(&model.hamiltonian_naive(alpha, t))?.op_norm()?;
        let predicted = (alpha - irr).abs() * rate * p_norm;
        Ok::<_, CliError>(if predicted == 0.0 { res } else { (res / predicted - 1.0).abs() })
    })?;
    suite.at_most("circuit-model", "residual_formula_relative_error", errors.into_iter().fold(0.0, f64::max), 1e-10);

    let shared: Arc<dyn GaugeModel> = Arc::new(model);
    let tested = under_test(shared.clone(), skip);
    let (_, psi0) = ground_state(&shared.naive(irr, 0.0))?;
    let opts = PropagationOptions::new(0.05);
    let fidelities = exec.try_map(gauges, |&alpha| {
        verify_frame_map(tested.clone(), GaugeChoice::correct(irr), GaugeChoice::correct(alpha), &psi0, 0.0, 2.0 * PI, &opts)
    })?;
    suite.at_least("gauge-engine", "circuit_covariance_fidelity", fidelities.into_iter().fold(1.0, f64::min), 1.0 - 1e-6);

    let ramped: Arc<dyn GaugeModel> = Arc::new(circuit_model(DriveSignal::linear_ramp(1.0, 0.0))?);
    let (_, psi0) = ground_state(&ramped.naive(0.0, 0.0))?;
    let f = verify_frame_map(ramped, GaugeChoice::naive(0.0), GaugeChoice::naive(1.0), &psi0, 0.0, 1.0, &PropagationOptions::new(0.01))?;
    suite.at_least("gauge-engine", "circuit_naive_deficit", 1.0 - f, 1e-3);
    Ok(())
}

fn dipole_spec(theta: f64, n: usize) -> DipoleSpec {
    DipoleSpec {
        mass: 1.0,
        charge: 0.3,
        omega0: 1.0,
        omega_c: 1.3,
        theta,
        mu: DriveSignal::gaussian_pulse(1.0, 2.0),
        n_matter: n,
        n_field: n,
    }
}

fn dipole_checks(suite: &mut Suite, gauges: &[f64], skip: bool, exec: Execution) -> Result<(), CliError> {
    let mut zero = 0.0_f64;
    let mut gap = 0.0_f64;
    for theta in [0.0, FRAC_PI_4, FRAC_PI_2] {
        let model = DipoleModel::new(dipole_spec(theta, 6))?;
        let irr = model.irrotational_alpha();
        let e = model.spec().charge;
        for t in [-1.3, 0.4, 2.2] {
            zero = zero.max(model.correction_x(irr, t).max_abs());
            let expected = model
                .coupling_operator()
                .scaled(-e * model.spec().mu.derivative(t) * theta.cos().powi(2));
            for &alpha in gauges {
                let diff = model.class_member(0.0, alpha, t).try_sub(&model.hamiltonian_correct(alpha, t))?;
                gap = gap.max(diff.try_sub(&expected)?.max_abs());
            }
        }
    }
    suite.at_most("dipole-model", "correction_at_cos2_theta", zero, 0.0);
    suite.at_most("dipole-model", "wrong_prescription_gap_error", gap, 1e-10);

    let model = DipoleModel::new(dipole_spec(FRAC_PI_4, 12))?;
    let irr = model.irrotational_alpha();
    let shared: Arc<dyn GaugeModel> = Arc::new(model);
    let tested = under_test(shared.clone(), skip);
    let (_, psi0) = ground_state(&shared.naive(irr, -6.0))?;
    let opts = PropagationOptions::new(0.05);
    let fidelities = exec.try_map(gauges, |&alpha| {
        verify_frame_map(tested.clone(), GaugeChoice::correct(irr), GaugeChoice::correct(alpha), &psi0, -6.0, 6.0, &opts)
    })?;
    suite.at_least("gauge-engine", "dipole_covariance_fidelity", fidelities.into_iter().fold(1.0, f64::min), 1.0 - 1e-5);
    Ok(())
}

fn oscillator_pair() -> Result<(Operator, Operator, Operator), CliError> {
    let matter = FockBasis::new(6, 1.0, 1.0)?;
    let field = FockBasis::new(5, 1.4, 1.0)?;
    let (_, x, p) = ladder_operators(&matter)?;
    let (_, fx, fp) = ladder_operators(&field)?;
    let im = Operator::identity(matter.tag());
    let ifield = Operator::identity(field.tag());
    let h = &tensor(&(&(&x * &x) + &(&p * &p)), &ifield) + &tensor(&im, &(&fp * &fp));
    Ok((h, tensor(&x, &fx), tensor(&x, &ifield)))
}

fn gauge_checks(suite: &mut Suite) -> Result<(), CliError> {
    let (h, coupling, _) = oscillator_pair()?;
    let label = Label { alpha: 0.0, variant: Variant::Naive };
    let tdh = TimeDependentHamiltonian::constant(h.clone(), label);
    let recipe = GeneratorRecipe::single(Profile::new(0.6, DriveSignal::sinusoid(1.0, 0.8)), coupling)?;
    let there = transform(&tdh, &recipe)?;
    let back = transform(&there, &recipe.negated())?;
    let mut round_trip = 0.0_f64;
    let mut hermiticity = 0.0_f64;
    for t in [-1.0, 0.3, 2.0] {
        round_trip = round_trip.max(back.at(t).try_sub(&h)?.max_abs());
        hermiticity = hermiticity.max(there.at(t).hermiticity_deviation());
    }
    suite.at_most("gauge-engine", "transform_involution", round_trip, 1e-9);
    suite.at_most("gauge-engine", "transform_hermiticity", hermiticity, 1e-12);
    suite.at_most("gauge-engine", "frame_unitarity", recipe.unitary(0.9)?.unitarity_deviation(), 1e-12);
    Ok(())
}

fn propagation_checks(suite: &mut Suite) -> Result<(), CliError> {
    let (h0, _, x) = oscillator_pair()?;
    let drive = DriveSignal::sinusoid(0.5, 0.7);
    let label = Label { alpha: 0.0, variant: Variant::Naive };
    let tag = h0.tag().clone();
    let tdh = TimeDependentHamiltonian::new(tag, label, move |t| {
        let mut h = h0.clone();
        h.add_scaled(drive.value(t), &x);
        h
    });
    let mut psi0 = ndarray::Array1::<C64>::zeros(tdh.dim());
    psi0[0] = C64::new(1.0, 0.0);
    let traj = propagate(&tdh, &psi0, 0.0, 10.0, &PropagationOptions::new(0.01).record_every(0))?;
    suite.at_most("propagation", "norm_drift_per_1000_steps", traj.max_norm_drift * 1000.0 / traj.steps as f64, 1e-9);

    let opts = PropagationOptions::new(0.005).record_every(0);
    let mid = propagate(&tdh, &psi0, 0.0, 2.0, &opts)?;
    let rk = propagate(&tdh, &psi0, 0.0, 2.0, &opts.clone().method(Method::Rk4))?;
    suite.at_most("propagation", "midpoint_vs_rk4", max_abs_diff(mid.final_state(), rk.final_state()), 1e-5);
    Ok(())
}

fn lineshape_checks(suite: &mut Suite, gauges: &[f64], exec: Execution) -> Result<(), CliError> {
    let omega_eg = 1.0;
    let gamma = 0.01;
    let grid = ModeGrid::centered(omega_eg, 0.9, 2000)?;
    let freqs = grid.frequencies();
    let t_final = 15.0 / gamma;
    let dt = default_emission_dt(&grid, omega_eg);
    let peak = 2.0 / (PI * gamma);

    let mut closed_peak = 0.0_f64;
    for &alpha in gauges {
        let s = closed_form_spectrum(alpha, &[omega_eg], omega_eg, gamma)?.values[0];
        closed_peak = closed_peak.max((s / peak - 1.0).abs());
    }
    suite.at_most("lineshape", "closed_form_peak_error", closed_peak, 1e-12);
    let s0 = closed_form_spectrum(0.0, &[2.0 * omega_eg], omega_eg, gamma)?.values[0];
    let s1 = closed_form_spectrum(1.0, &[2.0 * omega_eg], omega_eg, gamma)?.values[0];
    suite.at_most("lineshape", "closed_form_ratio_error", (s0 / s1 - 0.25).abs(), 1e-15);

    let runs = exec.try_map(gauges, |&alpha| {
        let spec = EmitterSpec::with_gamma(omega_eg, gamma, alpha, &grid);
        let state = simulate_emission(&spec, &grid, t_final, dt)?;
        let numerical = numerical_spectrum(&state, &grid, omega_eg, alpha)?;
        let closed = closed_form_spectrum(alpha, &freqs, omega_eg, gamma)?;
        let dev = numerical.max_relative_deviation(&closed, omega_eg, 5.0 * gamma)?;
        Ok::<_, CliError>((dev, (numerical.value_near(omega_eg) / peak - 1.0).abs()))
    })?;
    suite.at_most("lineshape", "numerical_vs_closed_form", runs.iter().map(|r| r.0).fold(0.0, f64::max), 0.02);
    suite.at_most("lineshape", "numerical_peak_error", runs.iter().map(|r| r.1).fold(0.0, f64::max), 0.01);

    let g0 = EmitterSpec::with_gamma(omega_eg, gamma, 0.0, &grid).g0;
    let calibration = calibrate_kick(omega_eg, g0, 1.0, &grid, t_final, dt, exec)?;
    let reference = closed_form_spectrum(0.0, &freqs, omega_eg, gamma)?;
    let class = exec.try_map(gauges, |&alpha| {
        let spec = EmitterSpec { omega_eg, g0, alpha };
        sudden_switch_class_run(&spec, &grid, t_final, dt, calibration.phase)?
            .max_relative_deviation(&reference, omega_eg, 5.0 * gamma)
    })?;
    suite.at_most("lineshape", "sudden_switch_class_deviation", class.into_iter().fold(0.0, f64::max), 0.03);
    Ok(())
}
