//! Property-based checks of the invariants each module promises.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use proptest::prelude::*;

use gaugekit::circuit::{branch_fluxes, build_reduction, CircuitModel, CircuitSpec};
use gaugekit::dipole::{DipoleModel, DipoleSpec};
use gaugekit::drive::DriveSignal;
use gaugekit::gauge::{transform, GaugeModel, GeneratorRecipe, Label, Profile, TimeDependentHamiltonian, Variant};
use gaugekit::lineshape::{closed_form_spectrum, coupling_profile, spectrum_ratio};
use gaugekit::operator::{
    expm_hermitian, ladder_operators, tensor, translation_unitary, FockBasis, GridBasis, Operator,
};
use gaugekit::propagation::{propagate, PropagationOptions};

fn drive_strategy() -> impl Strategy<Value = DriveSignal> {
    prop_oneof![
        (-3.0..3.0f64).prop_map(DriveSignal::constant),
        (-3.0..3.0f64, -1.0..1.0f64).prop_map(|(s, o)| DriveSignal::linear_ramp(s, o)),
        (0.2..3.0f64, -2.0..2.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(tau, a, c, o)| {
            DriveSignal::SmoothStep { amplitude: a, ramp_time: tau, center: c, offset: o }
        }),
        (-2.0..2.0f64, 0.1..3.0f64, -PI..PI, -1.0..1.0f64).prop_map(|(a, w, p, o)| {
            DriveSignal::Sinusoid { amplitude: a, frequency: w, phase: p, offset: o }
        }),
        (-2.0..2.0f64, 0.3..3.0f64, 0.5..3.0f64, -1.0..1.0f64).prop_map(|(a, v, w, c)| {
            DriveSignal::GaussianPulse { amplitude: a, speed: v, width: w, center: c }
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drive_derivative_matches_central_difference(
        sig in drive_strategy(),
        ts in proptest::collection::vec(-6.0..6.0f64, 100),
    ) {
        let h = 1e-6;
        for t in ts {
            let d = sig.derivative(t);
            let fd = (sig.value(t + h) - sig.value(t - h)) / (2.0 * h);
            prop_assert!(sig.value(t).is_finite() && d.is_finite());
            prop_assert!((d - fd).abs() < 1e-6 * (1.0 + d.abs()), "{sig:?} t={t}: {d} vs {fd}");
        }
    }

    #[test]
    fn branch_fluxes_sum_to_external_flux(q in -50.0..50.0f64, phi in -20.0..20.0f64, alpha in -1.0..2.0f64) {
        let (x0, x1) = branch_fluxes(q, phi, alpha);
        // exact in real arithmetic; floating sums are exact to a few ulp of the largest term
        let scale = q.abs().max(phi.abs()).max((alpha * phi).abs()).max(f64::MIN_POSITIVE);
        prop_assert!((x0 + x1 - phi).abs() <= 4.0 * f64::EPSILON * scale);
    }

    #[test]
    fn reduction_determinant_is_minus_one(alpha in -5.0..5.0f64) {
        let r = build_reduction(alpha);
        prop_assert!((r.det() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_ratio_identity(alpha in -0.5..1.5f64, omega in 0.2..3.0f64) {
        let s_a = closed_form_spectrum(alpha, &[omega], 1.0, 0.01).unwrap().values[0];
        let s_1 = closed_form_spectrum(1.0, &[omega], 1.0, 0.01).unwrap().values[0];
        prop_assert!((s_a - spectrum_ratio(alpha, omega, 1.0) * s_1).abs() <= 1e-12 * s_a.abs().max(1e-300));
        prop_assert!((coupling_profile(alpha, 1.3, 1.3, 0.2) - 0.2).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn translations_compose_and_stay_unitary(c1 in -2.0..2.0f64, c2 in -2.0..2.0f64) {
        let basis = GridBasis::new(64, 6.0).unwrap();
        let u1 = translation_unitary(&basis, c1);
        let u2 = translation_unitary(&basis, c2);
        let u12 = translation_unitary(&basis, c1 + c2);
        prop_assert!((&(&u1 * &u2) - &u12).max_abs() < 1e-12);
        prop_assert!(u1.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn expm_of_random_hermitian_is_unitary(entries in proptest::collection::vec(-1.0..1.0f64, 72), s in -5.0..5.0f64) {
        let n = 6;
        let mut m = ndarray::Array2::<gaugekit::C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                let k = 2 * (i * n + j);
                m[[i, j]] = gaugekit::C64::new(entries[k], entries[k + 1]);
            }
        }
        let herm = &m + &m.t().mapv(|z| z.conj());
        let h = Operator::new(gaugekit::operator::BasisTag::Plain(n), herm).unwrap();
        let u = expm_hermitian(&h, s).unwrap();
        prop_assert!(u.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn transform_is_involutive_and_hermitian(scale in -1.0..1.0f64, freq in 0.2..2.0f64, t in -3.0..3.0f64) {
        let matter = FockBasis::new(6, 1.0, 1.0).unwrap();
        let field = FockBasis::new(5, 1.4, 1.0).unwrap();
        let (_, x, p) = ladder_operators(&matter).unwrap();
        let (_, fx, fp) = ladder_operators(&field).unwrap();
        let im = Operator::identity(matter.tag());
        let ifield = Operator::identity(field.tag());
        let h = &tensor(&(&(&x * &x) + &(&p * &p)), &ifield) + &tensor(&im, &(&fp * &fp));
        let label = Label { alpha: 0.0, variant: Variant::Naive };
        let tdh = TimeDependentHamiltonian::constant(h.clone(), label);
        let recipe = GeneratorRecipe::single(Profile::new(scale, DriveSignal::sinusoid(1.0, freq)), tensor(&x, &fx)).unwrap();
        let there = transform(&tdh, &recipe).unwrap();
        let back = transform(&there, &recipe.negated()).unwrap();
        prop_assert!(there.at(t).is_hermitian());
        prop_assert!((&back.at(t) - &h).max_abs() < 1e-9);
    }

    #[test]
    fn dipole_class_identities(theta in 0.0..FRAC_PI_2, alpha in 0.0..1.0f64, t in -3.0..3.0f64) {
        let model = DipoleModel::new(DipoleSpec {
            mass: 1.0, charge: 0.4, omega0: 1.0, omega_c: 1.2, theta,
            mu: DriveSignal::gaussian_pulse(1.0, 2.0), n_matter: 5, n_field: 5,
        }).unwrap();
        let irr = model.irrotational_alpha();
        prop_assert!(model.correction_x(irr, t).max_abs() < 1e-15);
        prop_assert!((&model.class_member(irr, alpha, t) - &model.hamiltonian_correct(alpha, t)).max_abs() < 1e-13);
        let gap = &model.class_member(0.0, alpha, t) - &model.hamiltonian_correct(alpha, t);
        let expected = model.coupling_operator().scaled(-0.4 * model.spec().mu.derivative(t) * theta.cos().powi(2));
        prop_assert!((&gap - &expected).max_abs() < 1e-10);
    }

    #[test]
    fn circuit_correction_vanishes_only_at_irrotational_gauge(c0 in 0.5..5.0f64, c1 in 0.5..5.0f64, t in -3.0..3.0f64) {
        let model = CircuitModel::new(CircuitSpec {
            c0, c1, ej0: 1.0, ej1: 1.0,
            flux: DriveSignal::sinusoid(0.4, 1.0),
            basis: GridBasis::new(16, 8.0).unwrap(),
        }).unwrap();
        let irr = GaugeModel::irrotational_alpha(&model);
        prop_assert_eq!(irr, c1 / (c0 + c1));
        prop_assert_eq!(model.correction_x(irr, t).max_abs(), 0.0);
        prop_assert_eq!(model.hamiltonian_correct(irr, t), model.hamiltonian_naive(irr, t));
    }
}

#[test]
fn midpoint_norm_drift_per_thousand_steps() {
    let matter = FockBasis::new(12, 1.0, 1.0).unwrap();
    let field = FockBasis::new(12, 1.3, 1.0).unwrap();
    let model: Arc<dyn GaugeModel> = Arc::new(
        DipoleModel::new(DipoleSpec {
            mass: 1.0, charge: 0.3, omega0: matter.frequency, omega_c: field.frequency, theta: 0.4,
            mu: DriveSignal::gaussian_pulse(1.0, 2.0), n_matter: 12, n_field: 12,
        })
        .unwrap(),
    );
    let h = gaugekit::gauge::model_hamiltonian(model.clone(), Variant::Correct, 0.3).unwrap();
    let mut psi0 = ndarray::Array1::<gaugekit::C64>::zeros(144);
    psi0[0] = gaugekit::C64::new(1.0, 0.0);
    let traj = propagate(&h, &psi0, -5.0, 5.0, &PropagationOptions::new(0.01)).unwrap();
    assert_eq!(traj.steps, 1000);
    assert!(traj.max_norm_drift < 1e-9, "{}", traj.max_norm_drift);
}
