//! Single-mode electric-dipole model of a dipole carried through a cavity mode.
//!
//! Matter coordinate `x` (mass `m`, frequency `ω0`) and mode amplitude `X`
//! (unit mass, frequency `ω_c`) live on truncated Fock ladders. The prescribed
//! centre-of-mass motion enters only through the mode profile `μ(t)` sampled at
//! the dipole position and the angle `θ` between the polarization and the
//! velocity. In gauge α
//!
//! `H_α(t) = (p + e(1-α)μX)²/2m + ½mω0²x² + ½(P - eαμx)² + ½ω_c²X²`
//!
//! and the time-dependent constraint adds `X_α(t) = -eμ̇(t)(α - cos²θ) x⊗X`.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use crate::drive::DriveSignal;
use crate::error::{Error, Result};
use crate::gauge::{GaugeModel, GeneratorRecipe, Label, Profile, TimeDependentHamiltonian, Variant};
use crate::operator::{
    ladder_operators, tensor, BasisTag, FockBasis, Operator, Spectral,
};

#[derive(Clone, Debug, PartialEq)]
pub struct DipoleSpec {
    pub mass: f64,
    pub charge: f64,
    pub omega0: f64,
    pub omega_c: f64,
    /// Angle between mode polarization and the dipole velocity, in `[0, π/2]`.
    pub theta: f64,
    pub mu: DriveSignal,
    pub n_matter: usize,
    pub n_field: usize,
}

impl DipoleSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass", self.mass),
            ("charge", self.charge),
            ("omega0", self.omega0),
            ("omega_c", self.omega_c),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if !(0.0..=FRAC_PI_2).contains(&self.theta) {
            return Err(Error::invalid(
                "theta",
                format!("must lie in [0, π/2], got {}", self.theta),
            ));
        }
        for (name, n) in [("n_matter", self.n_matter), ("n_field", self.n_field)] {
            if n < 2 {
                return Err(Error::invalid(name, format!("must be at least 2, got {n}")));
            }
        }
        self.mu.validate()
    }

    /// `α_irr = cos²θ`.
    pub fn irrotational_alpha(&self) -> f64 {
        self.theta.cos().powi(2)
    }
}

#[derive(Debug)]
pub struct DipoleModel {
    spec: DipoleSpec,
    tag: BasisTag,
    free: Operator,
    p_field_x: Operator,
    field_x_sq: Operator,
    x_field_p: Operator,
    x_sq: Operator,
    x_field_x: Operator,
    generator_spectral: Spectral,
}

impl DipoleModel {
    pub fn new(spec: DipoleSpec) -> Result<Self> {
        spec.validate()?;
        let matter = FockBasis::new(spec.n_matter, spec.omega0, spec.mass)?;
        let field = FockBasis::new(spec.n_field, spec.omega_c, 1.0)?;
        let (_, x, p) = ladder_operators(&matter)?;
        let (_, fx, fp) = ladder_operators(&field)?;
        let im = Operator::identity(matter.tag());
        let if_ = Operator::identity(field.tag());

        let x2 = &x * &x;
        let fx2 = &fx * &fx;
        let h_matter = &(&p * &p).scaled(0.5 / spec.mass)
            + &x2.scaled(0.5 * spec.mass * spec.omega0 * spec.omega0);
        let h_field = &(&fp * &fp).scaled(0.5) + &fx2.scaled(0.5 * spec.omega_c * spec.omega_c);
        let free = &tensor(&h_matter, &if_) + &tensor(&im, &h_field);
        let generator_spectral = Spectral::kron(&Spectral::of(&x)?, &Spectral::of(&fx)?);

        Ok(DipoleModel {
            tag: free.tag().clone(),
            free,
            p_field_x: tensor(&p, &fx),
            field_x_sq: tensor(&im, &fx2),
            x_field_p: tensor(&x, &fp),
            x_sq: tensor(&x2, &if_),
            x_field_x: tensor(&x, &fx),
            generator_spectral,
            spec,
        })
    }

    pub fn spec(&self) -> &DipoleSpec {
        &self.spec
    }

    /// `x ⊗ X`.
    pub fn coupling_operator(&self) -> &Operator {
        &self.x_field_x
    }

    /// The uncoupled Hamiltonian (`μ = 0`).
    pub fn free_hamiltonian(&self) -> &Operator {
        &self.free
    }

    /// Index of `|n_matter⟩ ⊗ |n_field⟩` in the product basis.
    pub fn index(&self, n_matter: usize, n_field: usize) -> usize {
        n_matter * self.spec.n_field + n_field
    }

    /// Product-basis indices with both occupations below the given cutoffs.
    pub fn low_block(&self, keep_matter: usize, keep_field: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(keep_matter * keep_field);
        for i in 0..keep_matter.min(self.spec.n_matter) {
            for j in 0..keep_field.min(self.spec.n_field) {
                out.push(self.index(i, j));
            }
        }
        out
    }

    /// `x ⊗ I` and `I ⊗ X`.
    pub fn position_operators(&self) -> Result<(Operator, Operator)> {
        let matter = FockBasis::new(self.spec.n_matter, self.spec.omega0, self.spec.mass)?;
        let field = FockBasis::new(self.spec.n_field, self.spec.omega_c, 1.0)?;
        let (_, x, _) = ladder_operators(&matter)?;
        let (_, fx, _) = ladder_operators(&field)?;
        Ok((
            tensor(&x, &Operator::identity(field.tag())),
            tensor(&Operator::identity(matter.tag()), &fx),
        ))
    }

    /// `H_α` at a fixed mode-profile value `mu`.
    pub fn hamiltonian_at(&self, alpha: f64, mu: f64) -> Operator {
        let e = self.spec.charge;
        let m = self.spec.mass;
        let a = e * (1.0 - alpha) * mu;
        let b = e * alpha * mu;
        let mut h = self.free.clone();
        h.add_scaled(a / m, &self.p_field_x);
        h.add_scaled(a * a / (2.0 * m), &self.field_x_sq);
        h.add_scaled(-b, &self.x_field_p);
        h.add_scaled(b * b / 2.0, &self.x_sq);
        h
    }

    /// `H_α(t)`.
    pub fn hamiltonian_naive(&self, alpha: f64, t: f64) -> Operator {
        self.hamiltonian_at(alpha, self.spec.mu.value(t))
    }

    /// `X_α(t) = -eμ̇(t)(α - cos²θ) x⊗X`.
    pub fn correction_x(&self, alpha: f64, t: f64) -> Operator {
        let coef = -self.spec.charge
            * self.spec.mu.derivative(t)
            * (alpha - self.spec.irrotational_alpha());
        self.x_field_x.scaled(coef)
    }

    /// `H_α^t = H_α(t) + X_α(t)`.
    pub fn hamiltonian_correct(&self, alpha: f64, t: f64) -> Operator {
        let mut h = self.hamiltonian_naive(alpha, t);
        h.add_scaled(1.0, &self.correction_x(alpha, t));
        h
    }

    /// `X̃_α(t) = -eαμ̇(t) x⊗X`, the correction obtained by assuming the
    /// Coulomb gauge is irrotational.
    pub fn wrong_correction(&self, alpha: f64, t: f64) -> Operator {
        self.x_field_x
            .scaled(-self.spec.charge * alpha * self.spec.mu.derivative(t))
    }

    /// `H_{α'}(t) + X̃_{α'}(t) - X̃_{base}(t)`: gauge α' member of the class built on `base`.
    pub fn class_member(&self, alpha_base: f64, alpha_prime: f64, t: f64) -> Operator {
        let mut h = self.hamiltonian_naive(alpha_prime, t);
        let coef = -self.spec.charge * self.spec.mu.derivative(t) * (alpha_prime - alpha_base);
        h.add_scaled(coef, &self.x_field_x);
        h
    }

    /// `X_1(t) = -eμ̇(t)(1 - cos²θ) x⊗X`, the single-mode Röntgen interaction.
    pub fn roentgen_observable(&self, t: f64) -> Operator {
        self.correction_x(1.0, t)
    }

    /// `R_{αα'}(t) = exp(i (α-α')(-e) μ(t) x⊗X)`.
    pub fn gauge_unitary(&self, alpha: f64, alpha_prime: f64, t: f64) -> Operator {
        let c = -self.spec.charge * (alpha - alpha_prime) * self.spec.mu.value(t);
        self.generator_spectral.exp(-c)
    }

    pub fn irrotational_alpha(&self) -> f64 {
        self.spec.irrotational_alpha()
    }
}

impl GaugeModel for DipoleModel {
    fn tag(&self) -> BasisTag {
        self.tag.clone()
    }

    fn naive(&self, alpha: f64, t: f64) -> Operator {
        self.hamiltonian_naive(alpha, t)
    }

    fn correction(&self, alpha: f64, t: f64) -> Operator {
        self.correction_x(alpha, t)
    }

    fn frame_recipe(&self, alpha: f64, alpha_prime: f64) -> Result<GeneratorRecipe> {
        Ok(GeneratorRecipe::with_spectral(
            Profile::new(-self.spec.charge * (alpha - alpha_prime), self.spec.mu.clone()),
            self.x_field_x.clone(),
            self.generator_spectral.clone(),
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

/// `t ↦ class_member(base, α', t)`.
pub fn class_member_hamiltonian(
    model: Arc<DipoleModel>,
    alpha_base: f64,
    alpha_prime: f64,
) -> TimeDependentHamiltonian {
    let label = Label {
        alpha: alpha_prime,
        variant: Variant::ClassMember { base: alpha_base },
    };
    let tag = model.tag.clone();
    TimeDependentHamiltonian::new(tag, label, move |t| {
        model.class_member(alpha_base, alpha_prime, t)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{equivalence_class, model_hamiltonian, residual};
    use std::f64::consts::FRAC_PI_4;

    fn spec(theta: f64, n: usize) -> DipoleSpec {
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

    fn model(theta: f64, n: usize) -> DipoleModel {
        DipoleModel::new(spec(theta, n)).unwrap()
    }

    fn block_norm(model: &DipoleModel, op: &Operator, keep: usize) -> f64 {
        let idx = model.low_block(keep, keep);
        Operator::new(BasisTag::Plain(idx.len()), op.compress(&idx))
            .unwrap()
            .op_norm()
            .unwrap()
    }

    #[test]
    fn uncoupled_spectrum_is_two_ladders() {
        let m = DipoleModel::new(DipoleSpec {
            mu: DriveSignal::constant(0.0),
            ..spec(0.3, 24)
        })
        .unwrap();
        let h = m.hamiltonian_naive(0.4, 0.0);
        let spectral = Spectral::of(&h).unwrap();
        let mut analytic: Vec<f64> = (0..12)
            .flat_map(|n| (0..12).map(move |k| 1.0 * (n as f64 + 0.5) + 1.3 * (k as f64 + 0.5)))
            .collect();
        analytic.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (num, exact) in spectral.values().iter().zip(analytic.iter()).take(20) {
            assert!((num - exact).abs() < 1e-12, "{num} vs {exact}");
        }
    }

    #[test]
    fn coupling_structure_by_gauge() {
        let m = model(0.5, 6);
        let t = 0.2;
        let mu = m.spec.mu.value(t);
        let e = m.spec.charge;
        let coulomb = &m.hamiltonian_naive(0.0, t) - m.free_hamiltonian();
        let expected = &m.p_field_x.scaled(e * mu) + &m.field_x_sq.scaled(e * e * mu * mu / 2.0);
        assert!((&coulomb - &expected).max_abs() < 1e-14);
        let multipolar = &m.hamiltonian_naive(1.0, t) - m.free_hamiltonian();
        let expected = &m.x_field_p.scaled(-e * mu) + &m.x_sq.scaled(e * e * mu * mu / 2.0);
        assert!((&multipolar - &expected).max_abs() < 1e-14);
    }

    #[test]
    fn irrotational_angles() {
        assert!(spec(FRAC_PI_2, 4).irrotational_alpha() < 1e-30);
        assert_eq!(spec(0.0, 4).irrotational_alpha(), 1.0);
        assert!((spec(FRAC_PI_4, 4).irrotational_alpha() - 0.5).abs() < 1e-15);
        assert!(DipoleModel::new(spec(2.0, 4)).is_err());
        assert!(DipoleModel::new(spec(0.1, 1)).is_err());
    }

    #[test]
    fn correction_examples() {
        let m = model(0.7, 5);
        let t = -0.8;
        let irr = m.irrotational_alpha();
        assert!(m.correction_x(irr, t).max_abs() < 1e-15);
        assert_eq!(m.correction_x(0.3, 0.0).max_abs(), 0.0);
        assert_eq!(m.hamiltonian_correct(irr, t), {
            let mut h = m.hamiltonian_naive(irr, t);
            h.add_scaled(1.0, &m.correction_x(irr, t));
            h
        });
        let side = model(FRAC_PI_2, 5);
        assert!(side.correction_x(0.0, t).max_abs() < 1e-16);
        let diff = &side.hamiltonian_correct(0.0, t) - &side.hamiltonian_naive(0.0, t);
        assert!(diff.max_abs() < 1e-16);
    }

    #[test]
    fn correction_norm_identity() {
        let m = model(0.4, 6);
        let t = 1.1;
        let alpha = 0.9;
        let diff = &m.hamiltonian_correct(alpha, t) - &m.hamiltonian_naive(alpha, t);
        let expected = (m.spec.charge * m.spec.mu.derivative(t)).abs()
            * (alpha - m.irrotational_alpha()).abs()
            * m.coupling_operator().op_norm().unwrap();
        assert!((diff.op_norm().unwrap() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn wrong_correction_examples() {
        let m = model(0.6, 5);
        let t = 0.9;
        assert_eq!(m.wrong_correction(0.0, t).max_abs(), 0.0);
        assert_eq!(m.wrong_correction(0.7, 0.0).max_abs(), 0.0);
        let cos2 = m.irrotational_alpha();
        let expected = m
            .coupling_operator()
            .scaled(-m.spec.charge * m.spec.mu.derivative(t) * cos2);
        for alpha in [0.0, 0.3, 1.0] {
            let gap = &m.wrong_correction(alpha, t) - &m.correction_x(alpha, t);
            assert!((&gap - &expected).max_abs() < 1e-15);
        }
    }

    #[test]
    fn class_member_identities() {
        let m = model(0.9, 5);
        let t = 0.7;
        assert_eq!(m.class_member(0.4, 0.4, t), m.hamiltonian_naive(0.4, t));
        let mut wrong = m.hamiltonian_naive(0.6, t);
        wrong.add_scaled(1.0, &m.wrong_correction(0.6, t));
        assert!((&m.class_member(0.0, 0.6, t) - &wrong).max_abs() < 1e-15);
        let irr = m.irrotational_alpha();
        for alpha in [0.0, 0.25, 1.0] {
            let gap = &m.class_member(irr, alpha, t) - &m.hamiltonian_correct(alpha, t);
            assert!(gap.max_abs() < 1e-14);
        }
    }

    #[test]
    fn roentgen_examples() {
        let m = model(0.5, 5);
        assert_eq!(m.roentgen_observable(0.8), m.correction_x(1.0, 0.8));
        assert!(model(0.0, 5).roentgen_observable(0.8).max_abs() < 1e-15);
        assert_eq!(m.roentgen_observable(0.0).max_abs(), 0.0);
    }

    #[test]
    fn gauge_unitary_and_frame_map() {
        let m = model(0.8, 28);
        let t = 0.9;
        let id = Operator::identity(m.tag());
        assert!((&m.gauge_unitary(0.3, 0.3, t) - &id).max_abs() < 1e-12);
        let u = m.gauge_unitary(0.0, 1.0, t);
        assert!(u.unitarity_deviation() < 1e-12);
        for (a, b) in [(0.0, 1.0), (1.0, 0.25), (0.25, 0.0)] {
            let r = m.gauge_unitary(a, b, t);
            let mapped = m.hamiltonian_naive(a, t).conjugated_by(&r).unwrap();
            let gap = block_norm(&m, &(&mapped - &m.hamiltonian_naive(b, t)), 12);
            assert!(gap < 1e-8, "{a}->{b}: {gap}");
            let mut cov = m.hamiltonian_correct(a, t).conjugated_by(&r).unwrap();
            cov.add_scaled(1.0, &m.frame_recipe(a, b).unwrap().frame_velocity(t));
            let gap = block_norm(&m, &(&cov - &m.hamiltonian_correct(b, t)), 12);
            assert!(gap < 1e-7, "covariance {a}->{b}: {gap}");
        }
    }

    #[test]
    fn generator_derivative_matches_correction_difference() {
        let m = model(0.8, 6);
        let recipe = m.frame_recipe(0.2, 0.9).unwrap();
        let t = 1.3;
        let h = 1e-5;
        let fd = (&recipe.generator(t + h) - &recipe.generator(t - h)).scaled(0.5 / h);
        let expected = &m.correction_x(0.2, t) - &m.correction_x(0.9, t);
        assert!((&fd - &expected).max_abs() < 1e-6);
    }

    #[test]
    fn residual_vanishes_at_irrotational_gauge() {
        let shared: Arc<dyn GaugeModel> = Arc::new(model(0.5, 6));
        let irr = shared.irrotational_alpha();
        let naive = model_hamiltonian(shared.clone(), Variant::Naive, irr).unwrap();
        let correct = model_hamiltonian(shared, Variant::Correct, irr).unwrap();
        assert!(residual(&naive, &correct, &[-1.0, 0.5, 2.0]).unwrap() < 1e-14);
    }

    #[test]
    fn equivalence_class_members_match_class_member() {
        let dm = Arc::new(model(0.6, 20));
        let shared: Arc<dyn GaugeModel> = dm.clone();
        let base = model_hamiltonian(shared.clone(), Variant::Naive, 0.0).unwrap();
        let recipes: Vec<GeneratorRecipe> = [0.5, 1.0]
            .iter()
            .map(|&a| shared.frame_recipe(0.0, a).unwrap())
            .collect();
        let class = equivalence_class(&base, &recipes).unwrap();
        assert_eq!(class.len(), 3);
        let t = 0.6;
        for (member, alpha) in class[1..].iter().zip([0.5, 1.0]) {
            let direct = class_member_hamiltonian(dm.clone(), 0.0, alpha).at(t);
            let gap = block_norm(&dm, &(&member.at(t) - &direct), 4);
            assert!(gap < 1e-8, "{alpha}: {gap}");
        }
    }
}
