//! Frame transformations between gauges.
//!
//! A gauge change is a time-dependent unitary `U(t) = exp(i Σ c_i(t) G_i)` built
//! from mutually commuting Hermitian generators. Hamiltonians transform as
//! `H' = U H U† + i U̇ U†`. For commuting generators the velocity term is
//! `-Σ ċ_i(t) G_i`.

use std::fmt;
use std::sync::{Arc, OnceLock};

use ndarray::Array1;

use crate::drive::DriveSignal;
use crate::error::{Error, Result};
use crate::operator::{BasisTag, Operator, Spectral, C64};
use crate::propagation::{fidelity, propagate, PropagationOptions};

/// Which member of a gauge family a Hamiltonian is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variant {
    /// Parameters replaced by their time-dependent values after quantization.
    Naive,
    /// Naive plus the correction term from the time-dependent constraint.
    Correct,
    /// Naive in gauge α' plus the frame velocity term of the class built on `base`.
    ClassMember { base: f64 },
    /// Output of [`transform`].
    Transformed,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Naive => write!(f, "naive"),
            Variant::Correct => write!(f, "correct"),
            Variant::ClassMember { base } => write!(f, "class_member(base={base})"),
            Variant::Transformed => write!(f, "transformed"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Label {
    pub alpha: f64,
    pub variant: Variant,
}

/// `t ↦ H(t)` together with its basis and gauge label.
#[derive(Clone)]
pub struct TimeDependentHamiltonian {
    tag: BasisTag,
    label: Label,
    eval: Arc<dyn Fn(f64) -> Operator + Send + Sync>,
}

impl fmt::Debug for TimeDependentHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TimeDependentHamiltonian")
            .field("tag", &self.tag)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl TimeDependentHamiltonian {
    pub fn new(
        tag: BasisTag,
        label: Label,
        eval: impl Fn(f64) -> Operator + Send + Sync + 'static,
    ) -> Self {
        TimeDependentHamiltonian {
            tag,
            label,
            eval: Arc::new(eval),
        }
    }

    /// Time-independent Hamiltonian.
    pub fn constant(h: Operator, label: Label) -> Self {
        let tag = h.tag().clone();
        TimeDependentHamiltonian::new(tag, label, move |_| h.clone())
    }

    pub fn at(&self, t: f64) -> Operator {
        (self.eval)(t)
    }

    pub fn dim(&self) -> usize {
        self.tag.dim()
    }

    pub fn tag(&self) -> &BasisTag {
        &self.tag
    }

    pub fn label(&self) -> Label {
        self.label
    }
}

/// Scalar time profile `c(t) = scale · signal(t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub scale: f64,
    pub signal: DriveSignal,
}

impl Profile {
    pub fn new(scale: f64, signal: DriveSignal) -> Self {
        Profile { scale, signal }
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (v, d) = self.signal.eval(t);
        (self.scale * v, self.scale * d)
    }
}

#[derive(Clone, Debug)]
struct GeneratorTerm {
    profile: Profile,
    generator: Operator,
    spectral: Arc<OnceLock<Spectral>>,
}

/// Recipe for `U(t) = exp(i Σ c_i(t) G_i)` with commuting, time-independent `G_i`.
#[derive(Clone, Debug)]
pub struct GeneratorRecipe {
    tag: BasisTag,
    terms: Vec<GeneratorTerm>,
    target_alpha: Option<f64>,
}

/// Relative tolerance for declaring two generators commuting.
const COMMUTE_RTOL: f64 = 1e-10;

impl GeneratorRecipe {
    /// Single-term recipe `exp(i c(t) G)`.
    pub fn single(profile: Profile, generator: Operator) -> Result<Self> {
        GeneratorRecipe::new(generator.tag().clone(), vec![(profile, generator)])
    }

    /// Single-term recipe whose generator eigendecomposition is already known.
    pub fn with_spectral(profile: Profile, generator: Operator, spectral: Spectral) -> Result<Self> {
        let recipe = GeneratorRecipe::single(profile, generator)?;
        let _ = recipe.terms[0].spectral.set(spectral);
        Ok(recipe)
    }

    pub fn new(tag: BasisTag, terms: Vec<(Profile, Operator)>) -> Result<Self> {
        for (_, g) in &terms {
            if g.tag() != &tag {
                return Err(Error::BasisMismatch {
                    left: tag.to_string(),
                    right: g.tag().to_string(),
                });
            }
            g.require_hermitian()?;
        }
        for i in 0..terms.len() {
            for j in i + 1..terms.len() {
                let (a, b) = (&terms[i].1, &terms[j].1);
                let deviation = a.commutator(b)?.max_abs();
                let scale = a.max_abs() * b.max_abs();
                if deviation > COMMUTE_RTOL * scale.max(f64::MIN_POSITIVE) {
                    return Err(Error::NonCommutingGenerator { deviation });
                }
            }
        }
        Ok(GeneratorRecipe {
            tag,
            terms: terms
                .into_iter()
                .map(|(profile, generator)| GeneratorTerm {
                    profile,
                    generator,
                    spectral: Arc::new(OnceLock::new()),
                })
                .collect(),
            target_alpha: None,
        })
    }

    /// Recipe producing the identity frame.
    pub fn identity(tag: BasisTag) -> Self {
        GeneratorRecipe {
            tag,
            terms: Vec::new(),
            target_alpha: None,
        }
    }

    /// Records the gauge the recipe maps into, used to label transformed Hamiltonians.
    pub fn targeting(mut self, alpha: f64) -> Self {
        self.target_alpha = Some(alpha);
        self
    }

    pub fn target_alpha(&self) -> Option<f64> {
        self.target_alpha
    }

    pub fn tag(&self) -> &BasisTag {
        &self.tag
    }

    /// The inverse frame `exp(-i Σ c_i G_i)`.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        for term in &mut out.terms {
            term.profile.scale = -term.profile.scale;
        }
        out.target_alpha = None;
        out
    }

    /// Generator `Σ c_i(t) G_i`.
    pub fn generator(&self, t: f64) -> Operator {
        let mut g = Operator::zeros(self.tag.clone());
        for term in &self.terms {
            g.add_scaled(term.profile.eval(t).0, &term.generator);
        }
        g
    }

    /// `U(t)`.
    pub fn unitary(&self, t: f64) -> Result<Operator> {
        let mut u: Option<Operator> = None;
        for term in &self.terms {
            let c = term.profile.eval(t).0;
            let spectral = match term.spectral.get() {
                Some(s) => s,
                None => {
                    let s = Spectral::of(&term.generator)?;
                    term.spectral.get_or_init(|| s)
                }
            };
            let factor = spectral.exp(-c);
            u = Some(match u {
                None => factor,
                Some(acc) => acc.try_mul(&factor)?,
            });
        }
        Ok(u.unwrap_or_else(|| Operator::identity(self.tag.clone())))
    }

    /// `i U̇ U† = -Σ ċ_i(t) G_i`.
    pub fn frame_velocity(&self, t: f64) -> Operator {
        let mut v = Operator::zeros(self.tag.clone());
        for term in &self.terms {
            v.add_scaled(-term.profile.eval(t).1, &term.generator);
        }
        v
    }
}

/// A model with a one-parameter gauge family and explicit frame maps between members.
pub trait GaugeModel: Send + Sync {
    fn tag(&self) -> BasisTag;

    fn dim(&self) -> usize {
        self.tag().dim()
    }

    /// `H_α(t)`.
    fn naive(&self, alpha: f64, t: f64) -> Operator;

    /// `X_α(t) = H_α^t - H_α(t)`.
    fn correction(&self, alpha: f64, t: f64) -> Operator;

    /// `H_α^t`.
    fn correct(&self, alpha: f64, t: f64) -> Operator {
        let mut h = self.naive(alpha, t);
        h.add_scaled(1.0, &self.correction(alpha, t));
        h
    }

    /// Frame map taking gauge `alpha` to gauge `alpha_prime`.
    fn frame_recipe(&self, alpha: f64, alpha_prime: f64) -> Result<GeneratorRecipe>;

    fn frame_unitary(&self, alpha: f64, alpha_prime: f64, t: f64) -> Result<Operator> {
        self.frame_recipe(alpha, alpha_prime)?.unitary(t)
    }

    /// Gauge in which the correction vanishes.
    fn irrotational_alpha(&self) -> f64;
}

/// `H_α(t)` or `H_α^t` of a shared model as a time-dependent Hamiltonian.
pub fn model_hamiltonian(
    model: Arc<dyn GaugeModel>,
    variant: Variant,
    alpha: f64,
) -> Result<TimeDependentHamiltonian> {
    let label = Label { alpha, variant };
    let tag = model.tag();
    match variant {
        Variant::Naive => Ok(TimeDependentHamiltonian::new(tag, label, move |t| {
            model.naive(alpha, t)
        })),
        Variant::Correct => Ok(TimeDependentHamiltonian::new(tag, label, move |t| {
            model.correct(alpha, t)
        })),
        other => Err(Error::invalid(
            "variant",
            format!("{other} is not a generic model variant"),
        )),
    }
}

/// `H'(t) = U(t) H(t) U(t)† + i U̇(t) U(t)†`.
pub fn transform(
    h: &TimeDependentHamiltonian,
    recipe: &GeneratorRecipe,
) -> Result<TimeDependentHamiltonian> {
    if h.dim() != recipe.tag().dim() {
        return Err(Error::DimensionMismatch {
            left: h.dim(),
            right: recipe.tag().dim(),
        });
    }
    if h.tag() != recipe.tag() {
        return Err(Error::BasisMismatch {
            left: h.tag().to_string(),
            right: recipe.tag().to_string(),
        });
    }
    let inner = h.clone();
    let recipe = recipe.clone();
    let label = Label {
        alpha: recipe.target_alpha().unwrap_or(h.label().alpha),
        variant: Variant::Transformed,
    };
    Ok(TimeDependentHamiltonian::new(
        h.tag().clone(),
        label,
        move |t| {
            let u = recipe
                .unitary(t)
                .expect("generators were validated as Hermitian");
            let mut out = inner
                .at(t)
                .conjugated_by(&u)
                .expect("recipe and Hamiltonian share a basis");
            out.add_scaled(1.0, &recipe.frame_velocity(t));
            out
        },
    ))
}

/// Max over `t_samples` of `‖H^t - H(t)‖`.
pub fn residual(
    naive: &TimeDependentHamiltonian,
    correct: &TimeDependentHamiltonian,
    t_samples: &[f64],
) -> Result<f64> {
    if naive.dim() != correct.dim() {
        return Err(Error::DimensionMismatch {
            left: naive.dim(),
            right: correct.dim(),
        });
    }
    let mut worst = 0.0_f64;
    for &t in t_samples {
        worst = worst.max(correct.at(t).try_sub(&naive.at(t))?.op_norm()?);
    }
    Ok(worst)
}

/// The base Hamiltonian followed by its image under each recipe.
pub fn equivalence_class(
    base: &TimeDependentHamiltonian,
    recipes: &[GeneratorRecipe],
) -> Result<Vec<TimeDependentHamiltonian>> {
    let mut members = vec![base.clone()];
    for recipe in recipes {
        members.push(transform(base, recipe)?);
    }
    Ok(members)
}

/// A Hamiltonian family member: variant plus gauge parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeChoice {
    pub variant: Variant,
    pub alpha: f64,
}

impl GaugeChoice {
    pub fn naive(alpha: f64) -> Self {
        GaugeChoice {
            variant: Variant::Naive,
            alpha,
        }
    }

    pub fn correct(alpha: f64) -> Self {
        GaugeChoice {
            variant: Variant::Correct,
            alpha,
        }
    }
}

/// Evolves `psi0` under `source` and `R(t0) psi0` under `target`, then returns
/// `|⟨R(t1) ψ_source(t1) | ψ_target(t1)⟩|` with `R` the model's frame map.
pub fn verify_frame_map(
    model: Arc<dyn GaugeModel>,
    source: GaugeChoice,
    target: GaugeChoice,
    psi0: &Array1<C64>,
    t0: f64,
    t1: f64,
    options: &PropagationOptions,
) -> Result<f64> {
    let h_source = model_hamiltonian(model.clone(), source.variant, source.alpha)?;
    let h_target = model_hamiltonian(model.clone(), target.variant, target.alpha)?;
    let r0 = model.frame_unitary(source.alpha, target.alpha, t0)?;
    let r1 = model.frame_unitary(source.alpha, target.alpha, t1)?;
    let options = options.clone().final_state_only();
    let a = propagate(&h_source, psi0, t0, t1, &options)?;
    let b = propagate(&h_target, &r0.apply(psi0), t0, t1, &options)?;
    Ok(fidelity(&r1.apply(a.final_state()), b.final_state()))
}

/// Frame-covariance check of the correct theory between gauges `alpha` and `alpha_prime`.
pub fn verify_covariance(
    model: Arc<dyn GaugeModel>,
    alpha: f64,
    alpha_prime: f64,
    psi0: &Array1<C64>,
    t0: f64,
    t1: f64,
    options: &PropagationOptions,
) -> Result<f64> {
    verify_frame_map(
        model,
        GaugeChoice::correct(alpha),
        GaugeChoice::correct(alpha_prime),
        psi0,
        t0,
        t1,
        options,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{ladder_operators, tensor, FockBasis};

    fn oscillator() -> (FockBasis, Operator, Operator) {
        let basis = FockBasis::new(8, 1.0, 1.0).unwrap();
        let (_, x, p) = ladder_operators(&basis).unwrap();
        (basis, x, p)
    }

    fn label() -> Label {
        Label {
            alpha: 0.0,
            variant: Variant::Naive,
        }
    }

    #[test]
    fn zero_profile_leaves_hamiltonian_unchanged() {
        let (_, x, p) = oscillator();
        let h = &(&x * &x) + &(&p * &p);
        let tdh = TimeDependentHamiltonian::constant(h.clone(), label());
        let recipe = GeneratorRecipe::single(
            Profile::new(1.0, DriveSignal::constant(0.0)),
            x.clone(),
        )
        .unwrap();
        let out = transform(&tdh, &recipe).unwrap();
        assert!((&out.at(0.7) - &h).max_abs() < 1e-13);
    }

    #[test]
    fn commuting_generator_only_adds_velocity() {
        let (_, x, _) = oscillator();
        let h = &x * &x;
        let tdh = TimeDependentHamiltonian::constant(h.clone(), label());
        let recipe =
            GeneratorRecipe::single(Profile::new(0.5, DriveSignal::linear_ramp(2.0, 0.0)), x.clone())
                .unwrap();
        let out = transform(&tdh, &recipe).unwrap();
        let expected = &h - &x;
        assert!((&out.at(1.3) - &expected).max_abs() < 1e-12);
    }

    #[test]
    fn negated_recipe_undoes_transform() {
        let (_, x, p) = oscillator();
        let h = &(&x * &x) + &(&p * &p);
        let tdh = TimeDependentHamiltonian::constant(h.clone(), label());
        let recipe =
            GeneratorRecipe::single(Profile::new(0.8, DriveSignal::sinusoid(1.0, 1.3)), x.clone())
                .unwrap();
        let there = transform(&tdh, &recipe).unwrap();
        let back = transform(&there, &recipe.negated()).unwrap();
        for t in [0.0, 0.4, 2.2] {
            assert!(there.at(t).is_hermitian());
            assert!((&back.at(t) - &h).max_abs() < 1e-9);
        }
    }

    #[test]
    fn velocity_matches_finite_difference() {
        let (basis, x, _) = oscillator();
        let field = FockBasis::new(5, 1.5, 1.0).unwrap();
        let (_, xf, _) = ladder_operators(&field).unwrap();
        let g = tensor(&x, &xf);
        let recipe =
            GeneratorRecipe::single(Profile::new(-0.3, DriveSignal::gaussian_pulse(1.0, 2.0)), g)
                .unwrap();
        let t = 0.9;
        let h = 1e-5;
        let du = &recipe.unitary(t + h).unwrap() - &recipe.unitary(t - h).unwrap();
        let u_dag = recipe.unitary(t).unwrap().adjoint();
        let fd = (&du * &u_dag).scaled_complex(C64::new(0.0, 1.0 / (2.0 * h)));
        assert!((&fd - &recipe.frame_velocity(t)).max_abs() < 1e-6);
        assert_eq!(basis.dim, 8);
    }

    #[test]
    fn non_commuting_terms_are_rejected() {
        let (basis, x, p) = oscillator();
        let err = GeneratorRecipe::new(
            basis.tag(),
            vec![
                (Profile::new(1.0, DriveSignal::constant(1.0)), x),
                (Profile::new(1.0, DriveSignal::constant(1.0)), p),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonCommutingGenerator { .. }));
    }

    #[test]
    fn empty_recipe_list_is_just_the_base() {
        let (_, x, _) = oscillator();
        let tdh = TimeDependentHamiltonian::constant(x, label());
        let class = equivalence_class(&tdh, &[]).unwrap();
        assert_eq!(class.len(), 1);
    }
}
