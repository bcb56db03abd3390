//! Flux-threaded loop of two Josephson junctions sharing one node.
//!
//! Junction fluxes obey `x0 + x1 = φ(t)`. Gauge α eliminates them through the
//! node flux `q` as `x0 = αφ - q`, `x1 = (1-α)φ + q`, giving
//!
//! `H_α(t) = p²/2C - EJ0 cos(αφ(t) - q) - EJ1 cos((1-α)φ(t) + q)`
//!
//! with `C = C0 + C1`. The constraint's time dependence adds
//! `X_α(t) = (α - C1/C) φ̇(t) p`, which vanishes in the irrotational gauge
//! `α = C1/C`. Fluxes are in units where `2π/ϕ = 1`.

use std::sync::{Arc, OnceLock};

use ndarray::{concatenate, Array2, Axis};
use ndarray_linalg::{Inverse, SVD};

use crate::drive::DriveSignal;
use crate::error::{Error, Result};
use crate::gauge::{GaugeModel, GeneratorRecipe, Profile};
use crate::operator::{
    band_limited_projector, momentum_function, momentum_operator, momentum_spectral,
    position_operator, translation_unitary, BasisTag, GridBasis, Operator, Spectral,
};

#[derive(Clone, Debug, PartialEq)]
pub struct CircuitSpec {
    pub c0: f64,
    pub c1: f64,
    pub ej0: f64,
    pub ej1: f64,
    pub flux: DriveSignal,
    pub basis: GridBasis,
}

impl CircuitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c0", self.c0), ("c1", self.c1)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [("ej0", self.ej0), ("ej1", self.ej1)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("must be non-negative and finite, got {v}")));
            }
        }
        self.flux.validate()
    }

    pub fn capacitance(&self) -> f64 {
        self.c0 + self.c1
    }

    /// `α_irr = C1 / (C0 + C1)`.
    pub fn irrotational_alpha(&self) -> f64 {
        self.c1 / self.capacitance()
    }
}

/// Rows of the map from branch fluxes to (node flux, constraint) in gauge α.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstraintReduction {
    pub alpha: f64,
    pub g_row: [f64; 2],
    pub r_row: [f64; 2],
    pub s: [[f64; 2]; 2],
    pub s_inv: [[f64; 2]; 2],
}

impl ConstraintReduction {
    pub fn det(&self) -> f64 {
        self.s[0][0] * self.s[1][1] - self.s[0][1] * self.s[1][0]
    }
}

/// `S = [[α-1, α], [1, 1]]`, whose determinant is -1 for every α.
pub fn build_reduction(alpha: f64) -> ConstraintReduction {
    let g_row = [alpha - 1.0, alpha];
    let r_row = [1.0, 1.0];
    ConstraintReduction {
        alpha,
        g_row,
        r_row,
        s: [g_row, r_row],
        s_inv: [[-1.0, alpha], [1.0, 1.0 - alpha]],
    }
}

/// Stacks `S = (G; R)` and inverts it.
pub fn general_linear_reduction(
    g: &Array2<f64>,
    r: &Array2<f64>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if g.ncols() != r.ncols() {
        return Err(Error::DimensionMismatch {
            left: g.ncols(),
            right: r.ncols(),
        });
    }
    let s = concatenate(Axis(0), &[g.view(), r.view()])
        .map_err(|e| Error::Linalg(e.to_string()))?;
    if s.nrows() != s.ncols() {
        return Err(Error::DimensionMismatch {
            left: s.nrows(),
            right: s.ncols(),
        });
    }
    let (_, sigma, _) = s.svd(false, false)?;
    let largest = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let smallest = sigma.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
    if ratio < 1e-12 {
        return Err(Error::Singular { ratio });
    }
    let s_inv = s.inv()?;
    Ok((s, s_inv))
}

/// Junction fluxes `(x0, x1) = (αφ - q, (1-α)φ + q)`.
pub fn branch_fluxes(q: f64, phi: f64, alpha: f64) -> (f64, f64) {
    (alpha * phi - q, (1.0 - alpha) * phi + q)
}

/// Grid realization of the circuit with its operators precomputed.
#[derive(Debug)]
pub struct CircuitModel {
    spec: CircuitSpec,
    points: Vec<f64>,
    kinetic: Operator,
    momentum: Operator,
    momentum_spectral: OnceLock<Spectral>,
}

impl CircuitModel {
    pub fn new(spec: CircuitSpec) -> Result<Self> {
        spec.validate()?;
        let basis = spec.basis;
        let c = spec.capacitance();
        Ok(CircuitModel {
            points: basis.points(),
            kinetic: momentum_function(&basis, |k| k * k / (2.0 * c)),
            momentum: momentum_operator(&basis),
            momentum_spectral: OnceLock::new(),
            spec,
        })
    }

    pub fn spec(&self) -> &CircuitSpec {
        &self.spec
    }

    pub fn basis(&self) -> &GridBasis {
        &self.spec.basis
    }

    pub fn momentum(&self) -> &Operator {
        &self.momentum
    }

    pub fn position(&self) -> Operator {
        position_operator(&self.spec.basis)
    }

    /// `H_α` at a fixed external flux `phi`.
    pub fn hamiltonian_at_flux(&self, alpha: f64, phi: f64) -> Operator {
        let mut h = self.kinetic.clone();
        let potential: Vec<f64> = self
            .points
            .iter()
            .map(|&q| {
                let (x0, x1) = branch_fluxes(q, phi, alpha);
                -self.spec.ej0 * x0.cos() - self.spec.ej1 * x1.cos()
            })
            .collect();
        h.add_diagonal(&potential);
        h
    }

    /// `H_α(t)`.
    pub fn hamiltonian_naive(&self, alpha: f64, t: f64) -> Operator {
        self.hamiltonian_at_flux(alpha, self.spec.flux.value(t))
    }

    /// Scalar multiplying `p` in `X_α(t)`.
    pub fn correction_coefficient(&self, alpha: f64, t: f64) -> f64 {
        (alpha - self.spec.irrotational_alpha()) * self.spec.flux.derivative(t)
    }

    /// `X_α(t) = (α - C1/C) φ̇(t) p`.
    pub fn correction_x(&self, alpha: f64, t: f64) -> Operator {
        self.momentum.scaled(self.correction_coefficient(alpha, t))
    }

    /// `H_α^t = H_α(t) + X_α(t)`.
    pub fn hamiltonian_correct(&self, alpha: f64, t: f64) -> Operator {
        let mut h = self.hamiltonian_naive(alpha, t);
        h.add_scaled(self.correction_coefficient(alpha, t), &self.momentum);
        h
    }

    /// `R_{αα'}(t) = exp(i (α - α') φ(t) p)`, a translation of the node flux.
    pub fn gauge_unitary(&self, alpha: f64, alpha_prime: f64, t: f64) -> Operator {
        translation_unitary(&self.spec.basis, (alpha - alpha_prime) * self.spec.flux.value(t))
    }

    pub fn irrotational_alpha(&self) -> f64 {
        self.spec.irrotational_alpha()
    }

    /// Projector onto momenta below half the grid cutoff.
    ///
    /// Frame maps are exact translations only away from the momentum wrap, so
    /// operator identities are compared inside this subspace.
    pub fn low_momentum_projector(&self) -> Operator {
        let basis = self.spec.basis;
        band_limited_projector(&basis, 0.5 * basis.momentum_cutoff())
    }

    /// `‖P (R A R† + extra - B) P‖` for the low-momentum projector `P`.
    pub fn projected_mismatch(
        &self,
        a: &Operator,
        b: &Operator,
        unitary: &Operator,
        extra: Option<&Operator>,
    ) -> Result<f64> {
        let mut mapped = a.conjugated_by(unitary)?;
        if let Some(extra) = extra {
            mapped = mapped.try_add(extra)?;
        }
        let diff = mapped.try_sub(b)?;
        let proj = self.low_momentum_projector();
        proj.try_mul(&diff)?.try_mul(&proj)?.op_norm()
    }
}

impl GaugeModel for CircuitModel {
    fn tag(&self) -> BasisTag {
        self.spec.basis.tag()
    }

    fn naive(&self, alpha: f64, t: f64) -> Operator {
        self.hamiltonian_naive(alpha, t)
    }

    fn correction(&self, alpha: f64, t: f64) -> Operator {
        self.correction_x(alpha, t)
    }

    fn correct(&self, alpha: f64, t: f64) -> Operator {
        self.hamiltonian_correct(alpha, t)
    }

    fn frame_recipe(&self, alpha: f64, alpha_prime: f64) -> Result<GeneratorRecipe> {
        let spectral = self
            .momentum_spectral
            .get_or_init(|| momentum_spectral(&self.spec.basis))
            .clone();
        Ok(GeneratorRecipe::with_spectral(
            Profile::new(alpha - alpha_prime, self.spec.flux.clone()),
            self.momentum.clone(),
            spectral,
        )?
        .targeting(alpha_prime))
    }

    fn frame_unitary(&self, alpha: f64, alpha_prime: f64, t: f64) -> Result<Operator> {
        Ok(self.gauge_unitary(alpha, alpha_prime, t))
    }

    fn irrotational_alpha(&self) -> f64 {
        self.spec.irrotational_alpha()
    }
}

/// Shares a model behind the trait object the gauge engine consumes.
pub fn shared(model: CircuitModel) -> Arc<dyn GaugeModel> {
    Arc::new(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{model_hamiltonian, residual, transform, Variant};
    use crate::operator::{expm_hermitian, ground_state};
    use ndarray::array;

    fn small_spec(flux: DriveSignal) -> CircuitSpec {
        CircuitSpec {
            c0: 3.0,
            c1: 1.0,
            ej0: 1.0,
            ej1: 1.0,
            flux,
            basis: GridBasis::new(128, 4.0 * std::f64::consts::PI).unwrap(),
        }
    }

    #[test]
    fn reduction_matrices() {
        let r0 = build_reduction(0.0);
        assert_eq!(r0.s, [[-1.0, 0.0], [1.0, 1.0]]);
        assert_eq!(r0.det(), -1.0);
        assert_eq!(build_reduction(1.0).s, [[0.0, 1.0], [1.0, 1.0]]);
        for alpha in [-0.7, 0.0, 0.25, 0.61, 1.0, 3.3] {
            let r = build_reduction(alpha);
            assert!((r.det() + 1.0).abs() < 1e-14);
            for i in 0..2 {
                for j in 0..2 {
                    let prod: f64 = (0..2).map(|k| r.s[i][k] * r.s_inv[k][j]).sum();
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((prod - target).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn general_reduction_matches_two_junction_case() {
        let alpha = 0.37;
        let (s, s_inv) =
            general_linear_reduction(&array![[alpha - 1.0, alpha]], &array![[1.0, 1.0]]).unwrap();
        let r = build_reduction(alpha);
        for i in 0..2 {
            for j in 0..2 {
                assert!((s[[i, j]] - r.s[i][j]).abs() < 1e-15);
                assert!((s_inv[[i, j]] - r.s_inv[i][j]).abs() < 1e-14);
            }
        }
        let dup = array![[1.0, 1.0]];
        assert!(matches!(
            general_linear_reduction(&dup, &dup),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn branch_flux_examples() {
        let (x0, x1) = branch_fluxes(0.3, 1.0, 0.25);
        assert!((x0 + 0.05).abs() < 1e-15 && (x1 - 1.05).abs() < 1e-15);
        assert_eq!(branch_fluxes(0.0, 0.0, 0.6), (0.0, 0.0));
        assert_eq!(branch_fluxes(0.4, 2.0, 0.0), (-0.4, 2.4));
    }

    #[test]
    fn irrotational_values() {
        let spec = small_spec(DriveSignal::constant(0.0));
        assert_eq!(spec.irrotational_alpha(), 0.25);
        let sym = CircuitSpec { c0: 2.0, c1: 2.0, ..spec.clone() };
        assert_eq!(sym.irrotational_alpha(), 0.5);
        let lopsided = CircuitSpec { c0: 1e6, c1: 1.0, ..spec };
        assert!(lopsided.irrotational_alpha() < 1e-5);
    }

    #[test]
    fn rejects_negative_capacitance() {
        let spec = CircuitSpec { c0: -1.0, ..small_spec(DriveSignal::constant(0.0)) };
        assert!(matches!(
            CircuitModel::new(spec),
            Err(Error::InvalidParameter { field, .. }) if field == "c0"
        ));
    }

    #[test]
    fn naive_hamiltonian_structure() {
        let zero_ej = CircuitSpec { ej0: 0.0, ej1: 0.0, ..small_spec(DriveSignal::constant(0.0)) };
        let model = CircuitModel::new(zero_ej).unwrap();
        let p = model.momentum();
        let free = (p * p).scaled(1.0 / 8.0);
        assert!((&model.hamiltonian_naive(0.3, 0.0) - &free).max_abs() < 1e-10);

        let model = CircuitModel::new(small_spec(DriveSignal::constant(0.0))).unwrap();
        let a = model.hamiltonian_naive(0.0, 1.0);
        let b = model.hamiltonian_naive(0.8, 1.0);
        assert!((&a - &b).max_abs() < 1e-14);
        assert!(a.is_hermitian());
    }

    #[test]
    fn ground_energy_matches_dense_eigensolver() {
        let model = CircuitModel::new(CircuitSpec {
            c0: 1.0,
            c1: 1.0,
            ..small_spec(DriveSignal::constant(0.0))
        })
        .unwrap();
        let h = model.hamiltonian_naive(0.5, 0.0);
        let (e0, psi) = ground_state(&h).unwrap();
        let rayleigh = h.expectation(&psi).re;
        assert!((e0 - rayleigh).abs() < 1e-12);
        // well depth -2 plus zero-point energy of the harmonic approximation
        let harmonic = -2.0 + 0.5 * (2.0_f64 / 2.0).sqrt();
        assert!((e0 - harmonic).abs() < 0.1, "{e0}");
    }

    #[test]
    fn correction_examples() {
        let model = CircuitModel::new(small_spec(DriveSignal::linear_ramp(2.0, 0.0))).unwrap();
        assert_eq!(model.correction_x(0.25, 1.0).max_abs(), 0.0);
        let x = model.correction_x(0.0, 1.0);
        assert!((&x - &model.momentum().scaled(-0.5)).max_abs() < 1e-15);
        let still = CircuitModel::new(small_spec(DriveSignal::constant(0.4))).unwrap();
        assert_eq!(still.correction_x(0.9, 3.0).max_abs(), 0.0);
        assert_eq!(
            model.hamiltonian_correct(0.25, 0.7),
            model.hamiltonian_naive(0.25, 0.7)
        );
    }

    #[test]
    fn residual_is_scaled_momentum_norm() {
        let model: Arc<CircuitModel> =
            Arc::new(CircuitModel::new(small_spec(DriveSignal::linear_ramp(2.0, 0.0))).unwrap());
        let dynamic: Arc<dyn GaugeModel> = model.clone();
        let naive = model_hamiltonian(dynamic.clone(), Variant::Naive, 0.0).unwrap();
        let correct = model_hamiltonian(dynamic, Variant::Correct, 0.0).unwrap();
        let r = residual(&naive, &correct, &[0.3]).unwrap();
        let p_norm = model.momentum().op_norm().unwrap();
        assert!((r - 0.5 * p_norm).abs() < 1e-10 * r);
    }

    #[test]
    fn gauge_unitary_identities() {
        let model = CircuitModel::new(small_spec(DriveSignal::sinusoid(0.4, 1.0))).unwrap();
        let t = 1.1;
        let id = Operator::identity(model.tag());
        assert!((&model.gauge_unitary(0.3, 0.3, t) - &id).max_abs() < 1e-12);
        let round = &model.gauge_unitary(0.0, 1.0, t) * &model.gauge_unitary(1.0, 0.0, t);
        assert!((&round - &id).max_abs() < 1e-12);
        let recipe = model.frame_recipe(0.0, 1.0).unwrap();
        let via_recipe = recipe.unitary(t).unwrap();
        assert!((&via_recipe - &model.gauge_unitary(0.0, 1.0, t)).max_abs() < 1e-11);
        let via_expm = expm_hermitian(model.momentum(), -(0.0 - 1.0) * 0.4 * t.sin()).unwrap();
        let gap = (&via_expm - &via_recipe).max_abs();
        assert!(gap < 1e-10, "{gap}");
    }

    #[test]
    fn frame_map_and_covariance_on_low_momenta() {
        let model = CircuitModel::new(small_spec(DriveSignal::sinusoid(0.4, 1.0))).unwrap();
        let t = 0.9;
        for (a, b) in [(0.0, 0.25), (0.0, 1.0), (1.0, 0.25)] {
            let r = model.gauge_unitary(a, b, t);
            let naive = model
                .projected_mismatch(&model.hamiltonian_naive(a, t), &model.hamiltonian_naive(b, t), &r, None)
                .unwrap();
            assert!(naive < 1e-8, "naive frame map {a}->{b}: {naive}");
            let velocity = model.frame_recipe(a, b).unwrap().frame_velocity(t);
            let cov = model
                .projected_mismatch(
                    &model.hamiltonian_correct(a, t),
                    &model.hamiltonian_correct(b, t),
                    &r,
                    Some(&velocity),
                )
                .unwrap();
            assert!(cov < 1e-8, "covariance {a}->{b}: {cov}");
        }
    }

    #[test]
    fn transform_reproduces_target_gauge() {
        let model: Arc<dyn GaugeModel> =
            Arc::new(CircuitModel::new(small_spec(DriveSignal::sinusoid(0.4, 1.0))).unwrap());
        let source = model_hamiltonian(model.clone(), Variant::Correct, 0.0).unwrap();
        let target = model_hamiltonian(model.clone(), Variant::Correct, 1.0).unwrap();
        let moved = transform(&source, &model.frame_recipe(0.0, 1.0).unwrap()).unwrap();
        let circuit = CircuitModel::new(small_spec(DriveSignal::sinusoid(0.4, 1.0))).unwrap();
        let proj = circuit.low_momentum_projector();
        let t = 2.0;
        let diff = &moved.at(t) - &target.at(t);
        let projected = &(&proj * &diff) * &proj;
        assert!(projected.op_norm().unwrap() < 1e-8);
        assert_eq!(moved.label().alpha, 1.0);
    }
}
