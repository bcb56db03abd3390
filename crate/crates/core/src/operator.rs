//! Truncated-basis operators and the dense matrix algebra shared by every model.
//!
//! Two bases host the canonical pairs: a periodic position grid with spectral
//! momentum (the circuit's node flux and charge) and truncated Fock ladders
//! (the dipole coordinate and the cavity mode quadratures). Units have ħ = 1.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use ndarray::{linalg::kron, Array1, Array2, ShapeBuilder, Zip};
use ndarray_linalg::{EigValsh, Eigh, UPLO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative tolerance of the Hermiticity test: `max|M - M^H| < 1e-12 max|M|`.
pub const HERMITIAN_RTOL: f64 = 1e-12;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub enum BasisTag {
    Grid { n_points: usize, half_width: f64 },
    Fock { dim: usize },
    Product(Vec<BasisTag>),
    Plain(usize),
}

impl BasisTag {
    pub fn dim(&self) -> usize {
        match self {
            BasisTag::Grid { n_points, .. } => *n_points,
            BasisTag::Fock { dim } => *dim,
            BasisTag::Product(factors) => factors.iter().map(BasisTag::dim).product(),
            BasisTag::Plain(dim) => *dim,
        }
    }

    fn product(a: &BasisTag, b: &BasisTag) -> BasisTag {
        let mut factors = Vec::new();
        for tag in [a, b] {
            match tag {
                BasisTag::Product(inner) => factors.extend(inner.iter().cloned()),
                other => factors.push(other.clone()),
            }
        }
        BasisTag::Product(factors)
    }
}

impl fmt::Display for BasisTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisTag::Grid {
                n_points,
                half_width,
            } => write!(f, "grid({n_points}, ±{half_width})"),
            BasisTag::Fock { dim } => write!(f, "fock({dim})"),
            BasisTag::Product(factors) => {
                let parts: Vec<String> = factors.iter().map(|t| t.to_string()).collect();
                write!(f, "{}", parts.join("⊗"))
            }
            BasisTag::Plain(dim) => write!(f, "plain({dim})"),
        }
    }
}

/// Periodic position grid `x_j = -half_width + j·spacing`, `j = 0..n_points`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBasis {
    n_points: usize,
    half_width: f64,
}

impl GridBasis {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::invalid(
                "n_points",
                format!("must be a power of two ≥ 2, got {n_points}"),
            ));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::invalid(
                "half_width",
                format!("must be positive and finite, got {half_width}"),
            ));
        }
        Ok(GridBasis {
            n_points,
            half_width,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn momentum_spacing(&self) -> f64 {
        2.0 * PI / (self.n_points as f64 * self.spacing())
    }

    /// Largest momentum magnitude on the grid, `π / spacing`.
    pub fn momentum_cutoff(&self) -> f64 {
        PI / self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.n_points)
            .map(|j| -self.half_width + j as f64 * dx)
            .collect()
    }

    /// Spectral momenta `k_j = -π/spacing + j·Δk`.
    pub fn momenta(&self) -> Vec<f64> {
        let dk = self.momentum_spacing();
        (0..self.n_points)
            .map(|j| -self.momentum_cutoff() + j as f64 * dk)
            .collect()
    }

    pub fn tag(&self) -> BasisTag {
        BasisTag::Grid {
            n_points: self.n_points,
            half_width: self.half_width,
        }
    }

    /// Discretely normalized Gaussian `exp(-(x-center)²/(4σ²) + i k0 x)`.
    pub fn gaussian(&self, center: f64, sigma: f64, k0: f64) -> Array1<C64> {
        let mut psi: Array1<C64> = self
            .points()
            .into_iter()
            .map(|x| {
                let envelope = (-(x - center).powi(2) / (4.0 * sigma * sigma)).exp();
                C64::from_polar(envelope, k0 * x)
            })
            .collect();
        let n = norm(&psi);
        psi.mapv_inplace(|z| z / n);
        psi
    }

    /// Dense matrix of the circulant operator `Σ_k f(k)|k⟩⟨k|`.
    fn circulant(&self, symbol: impl Fn(f64) -> C64) -> Array2<C64> {
        let n = self.n_points;
        let momenta = self.momenta();
        let twiddle: Vec<C64> = (0..n)
            .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect();
        let weights: Vec<C64> = momenta.iter().map(|&k| symbol(k)).collect();
        // k_j·spacing = -π + 2πj/n, so the kernel only depends on (m - n) mod n.
        let column: Vec<C64> = (0..n)
            .map(|d| {
                let sum: C64 = weights
                    .iter()
                    .enumerate()
                    .map(|(j, w)| w * twiddle[(j * d) % n])
                    .sum();
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                sum * sign / n as f64
            })
            .collect();
        Array2::from_shape_fn((n, n), |(row, col)| column[(row + n - col) % n])
    }
}

/// Truncated harmonic-oscillator basis `|0⟩..|dim-1⟩` for a pair with the given mass and frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockBasis {
    pub dim: usize,
    pub frequency: f64,
    pub mass: f64,
}

impl FockBasis {
    pub fn new(dim: usize, frequency: f64, mass: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(Error::invalid("frequency", "must be positive and finite"));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::invalid("mass", "must be positive and finite"));
        }
        Ok(FockBasis {
            dim,
            frequency,
            mass,
        })
    }

    pub fn tag(&self) -> BasisTag {
        BasisTag::Fock { dim: self.dim }
    }

    /// Number-state vector `|n⟩`.
    pub fn number_state(&self, n: usize) -> Array1<C64> {
        let mut psi = Array1::zeros(self.dim);
        psi[n] = C64::new(1.0, 0.0);
        psi
    }
}

/// Dense complex matrix tagged with the basis it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    tag: BasisTag,
    mat: Array2<C64>,
}

impl Operator {
    pub fn new(tag: BasisTag, mat: Array2<C64>) -> Result<Self> {
        let (rows, cols) = mat.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch {
                left: rows,
                right: cols,
            });
        }
        if rows != tag.dim() {
            return Err(Error::DimensionMismatch {
                left: rows,
                right: tag.dim(),
            });
        }
        Ok(Operator { tag, mat })
    }

    pub fn zeros(tag: BasisTag) -> Self {
        let n = tag.dim();
        Operator {
            tag,
            mat: Array2::zeros((n, n)),
        }
    }

    pub fn identity(tag: BasisTag) -> Self {
        let n = tag.dim();
        Operator {
            tag,
            mat: Array2::eye(n),
        }
    }

    pub fn from_diagonal(tag: BasisTag, diagonal: &[f64]) -> Result<Self> {
        let mut op = Operator::zeros(tag);
        if diagonal.len() != op.dim() {
            return Err(Error::DimensionMismatch {
                left: diagonal.len(),
                right: op.dim(),
            });
        }
        for (i, &d) in diagonal.iter().enumerate() {
            op.mat[[i, i]] = C64::new(d, 0.0);
        }
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn tag(&self) -> &BasisTag {
        &self.tag
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Operator {
        Operator {
            tag: self.tag.clone(),
            mat: self.mat.t().mapv(|z| z.conj()),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim();
        let mut dev = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.mat[[i, j]] - self.mat[[j, i]].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.max_abs();
        scale == 0.0 || self.hermiticity_deviation() < HERMITIAN_RTOL * scale
    }

    pub(crate) fn require_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                deviation: self.hermiticity_deviation(),
            })
        }
    }

    fn check_compatible(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        if self.tag != other.tag {
            return Err(Error::BasisMismatch {
                left: self.tag.to_string(),
                right: other.tag.to_string(),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Operator) -> Result<Operator> {
        self.check_compatible(other)?;
        Ok(Operator {
            tag: self.tag.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    pub fn try_sub(&self, other: &Operator) -> Result<Operator> {
        self.check_compatible(other)?;
        Ok(Operator {
            tag: self.tag.clone(),
            mat: &self.mat - &other.mat,
        })
    }

    pub fn try_mul(&self, other: &Operator) -> Result<Operator> {
        self.check_compatible(other)?;
        Ok(Operator {
            tag: self.tag.clone(),
            mat: self.mat.dot(&other.mat),
        })
    }

    pub fn scaled(&self, factor: f64) -> Operator {
        Operator {
            tag: self.tag.clone(),
            mat: self.mat.mapv(|z| z * factor),
        }
    }

    pub fn scaled_complex(&self, factor: C64) -> Operator {
        Operator {
            tag: self.tag.clone(),
            mat: self.mat.mapv(|z| z * factor),
        }
    }

    /// `self += coef · other` in place.
    ///
    /// # Panics
    /// On mismatched bases.
    pub fn add_scaled(&mut self, coef: f64, other: &Operator) {
        assert_eq!(self.tag, other.tag, "add_scaled on mismatched bases");
        if coef == 0.0 {
            return;
        }
        Zip::from(&mut self.mat)
            .and(&other.mat)
            .for_each(|a, &b| *a += b * coef);
    }

    /// Adds `values[i]` to the diagonal entries.
    pub fn add_diagonal(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.dim(), "diagonal length mismatch");
        for (i, &v) in values.iter().enumerate() {
            self.mat[[i, i]] += v;
        }
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        let ab = self.try_mul(other)?;
        let ba = other.try_mul(self)?;
        ab.try_sub(&ba)
    }

    /// `U · self · U^H`.
    pub fn conjugated_by(&self, unitary: &Operator) -> Result<Operator> {
        self.check_compatible(unitary)?;
        let left = unitary.mat.dot(&self.mat);
        let u_h = unitary.mat.t().mapv(|z| z.conj());
        Ok(Operator {
            tag: self.tag.clone(),
            mat: left.dot(&u_h),
        })
    }

    pub fn apply(&self, psi: &Array1<C64>) -> Array1<C64> {
        self.mat.dot(psi)
    }

    pub fn expectation(&self, psi: &Array1<C64>) -> C64 {
        inner(psi, &self.apply(psi))
    }

    /// Spectral (largest singular value) norm.
    pub fn op_norm(&self) -> Result<f64> {
        if self.max_abs() == 0.0 {
            return Ok(0.0);
        }
        if self.is_hermitian() {
            let values = self.mat.eigvalsh(UPLO::Lower)?;
            Ok(values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
        } else {
            let gram = self.mat.t().mapv(|z| z.conj()).dot(&self.mat);
            let values = gram.eigvalsh(UPLO::Lower)?;
            Ok(values.iter().fold(0.0_f64, |acc, &v| acc.max(v)).sqrt())
        }
    }

    /// Sub-matrix on the given basis indices.
    pub fn compress(&self, indices: &[usize]) -> Array2<C64> {
        Array2::from_shape_fn((indices.len(), indices.len()), |(i, j)| {
            self.mat[[indices[i], indices[j]]]
        })
    }

    /// Max deviation of `U^H U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        let gram = self.mat.t().mapv(|z| z.conj()).dot(&self.mat);
        let n = self.dim();
        let mut dev = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((gram[[i, j]] - target).norm());
            }
        }
        dev
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        self.try_add(rhs).expect("operator sum on mismatched bases")
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        self.try_sub(rhs).expect("operator difference on mismatched bases")
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        self.try_mul(rhs).expect("operator product on mismatched bases")
    }
}

/// Eigendecomposition `H = V diag(λ) V^H` of a Hermitian operator.
#[derive(Clone, Debug)]
pub struct Spectral {
    tag: BasisTag,
    values: Array1<f64>,
    vectors: Array2<C64>,
}

impl Spectral {
    pub fn of(op: &Operator) -> Result<Self> {
        op.require_hermitian()?;
        // ndarray-linalg returns conjugated eigenvectors for row-major complex input
        let mut fortran = Array2::<C64>::zeros(op.mat.raw_dim().f());
        fortran.assign(&op.mat);
        let (values, vectors) = fortran.eigh(UPLO::Lower)?;
        Ok(Spectral {
            tag: op.tag.clone(),
            values,
            vectors,
        })
    }

    /// Decomposition of `A ⊗ B` from those of the factors.
    pub fn kron(a: &Spectral, b: &Spectral) -> Spectral {
        let nb = b.values.len();
        let values = Array1::from_shape_fn(a.values.len() * nb, |k| {
            a.values[k / nb] * b.values[k % nb]
        });
        Spectral {
            tag: BasisTag::product(&a.tag, &b.tag),
            values,
            vectors: kron(&a.vectors, &b.vectors),
        }
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn vectors(&self) -> &Array2<C64> {
        &self.vectors
    }

    /// Applies `f(λ)` to the spectrum: `V diag(f(λ)) V^H`.
    pub fn map(&self, f: impl Fn(f64) -> C64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (mut col, &lam) in scaled.columns_mut().into_iter().zip(self.values.iter()) {
            let w = f(lam);
            col.mapv_inplace(|z| z * w);
        }
        let v_h = self.vectors.t().mapv(|z| z.conj());
        Operator {
            tag: self.tag.clone(),
            mat: scaled.dot(&v_h),
        }
    }

    /// `exp(-i s H)`.
    pub fn exp(&self, s: f64) -> Operator {
        self.map(|lam| C64::from_polar(1.0, -s * lam))
    }

    /// `exp(-i s H) ψ` without forming the matrix.
    pub fn exp_apply(&self, s: f64, psi: &Array1<C64>) -> Array1<C64> {
        let mut coeffs = self.vectors.t().mapv(|z| z.conj()).dot(psi);
        for (c, &lam) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= C64::from_polar(1.0, -s * lam);
        }
        self.vectors.dot(&coeffs)
    }

    pub fn reconstruct(&self) -> Operator {
        self.map(|lam| C64::new(lam, 0.0))
    }
}

pub fn inner(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(psi: &Array1<C64>) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn position_operator(basis: &GridBasis) -> Operator {
    Operator::from_diagonal(basis.tag(), &basis.points()).expect("grid diagonal has grid length")
}

/// Spectral-derivative momentum `p = Σ_k k |k⟩⟨k|` on the periodic grid.
pub fn momentum_operator(basis: &GridBasis) -> Operator {
    Operator {
        tag: basis.tag(),
        mat: basis.circulant(|k| C64::new(k, 0.0)),
    }
}

/// Kinetic-type operator `Σ_k f(k) |k⟩⟨k|` for a real symbol `f`.
pub fn momentum_function(basis: &GridBasis, symbol: impl Fn(f64) -> f64) -> Operator {
    Operator {
        tag: basis.tag(),
        mat: basis.circulant(|k| C64::new(symbol(k), 0.0)),
    }
}

/// `exp(i c p)` realized as Fourier-phase multiplication; maps `ψ(q) → ψ(q + c)`.
pub fn translation_unitary(basis: &GridBasis, c: f64) -> Operator {
    Operator {
        tag: basis.tag(),
        mat: basis.circulant(|k| C64::from_polar(1.0, k * c)),
    }
}

/// Projector onto momenta with `|k| ≤ k_cut`.
pub fn band_limited_projector(basis: &GridBasis, k_cut: f64) -> Operator {
    Operator {
        tag: basis.tag(),
        mat: basis.circulant(|k| {
            if k.abs() <= k_cut {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    }
}

/// Lowering operator and quadratures `x = (a + a†)/√(2mω)`, `p = i√(mω/2)(a† - a)`.
pub fn ladder_operators(basis: &FockBasis) -> Result<(Operator, Operator, Operator)> {
    if basis.dim < 2 {
        return Err(Error::invalid(
            "dim",
            format!("ladder operators need dim ≥ 2, got {}", basis.dim),
        ));
    }
    let n = basis.dim;
    let mut a = Array2::<C64>::zeros((n, n));
    for k in 1..n {
        a[[k - 1, k]] = C64::new((k as f64).sqrt(), 0.0);
    }
    let a_dag = a.t().to_owned();
    let mw = basis.mass * basis.frequency;
    let x = (&a + &a_dag).mapv(|z| z / (2.0 * mw).sqrt());
    let p = (&a_dag - &a).mapv(|z| z * I * (mw / 2.0).sqrt());
    let tag = basis.tag();
    Ok((
        Operator {
            tag: tag.clone(),
            mat: a,
        },
        Operator {
            tag: tag.clone(),
            mat: x,
        },
        Operator { tag, mat: p },
    ))
}

/// `exp(-i s H)` via Hermitian eigendecomposition.
pub fn expm_hermitian(h: &Operator, s: f64) -> Result<Operator> {
    Ok(Spectral::of(h)?.exp(s))
}

/// Lowest eigenpair of a Hermitian operator.
pub fn ground_state(h: &Operator) -> Result<(f64, Array1<C64>)> {
    let spectral = Spectral::of(h)?;
    Ok((spectral.values[0], spectral.vectors.column(0).to_owned()))
}

/// Plane-wave eigendecomposition of the grid momentum, built without a solver.
pub fn momentum_spectral(basis: &GridBasis) -> Spectral {
    let n = basis.n_points;
    let points = basis.points();
    let momenta = basis.momenta();
    let scale = 1.0 / (n as f64).sqrt();
    Spectral {
        tag: basis.tag(),
        values: Array1::from(momenta.clone()),
        vectors: Array2::from_shape_fn((n, n), |(m, j)| {
            C64::from_polar(scale, momenta[j] * points[m])
        }),
    }
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    Operator {
        tag: BasisTag::product(&a.tag, &b.tag),
        mat: kron(&a.mat, &b.mat),
    }
}
