//! Schrödinger-picture propagation `i ψ̇ = H(t) ψ`.
//!
//! The default stepper applies `exp(-i H(t + dt/2) dt)` exactly through a
//! Lanczos (Krylov) exponential action with full reorthogonalization, so every
//! step is unitary to rounding. A classical RK4 integrator is kept as an
//! independent cross-check.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::TimeDependentHamiltonian;
use crate::operator::{inner, norm, Operator, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    MidpointExp,
    Rk4,
}

#[derive(Clone, Debug)]
pub struct PropagationOptions {
    pub method: Method,
    pub dt: f64,
    /// Record every n-th step (0 records only the endpoints).
    pub record_every: usize,
    pub store_states: bool,
    pub observables: Vec<(String, Operator)>,
    /// Absolute error target of each Krylov exponential action.
    pub krylov_tol: f64,
}

impl PropagationOptions {
    pub fn new(dt: f64) -> Self {
        PropagationOptions {
            method: Method::MidpointExp,
            dt,
            record_every: 1,
            store_states: false,
            observables: Vec::new(),
            krylov_tol: 1e-13,
        }
    }

    pub fn method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn record_every(mut self, n: usize) -> Self {
        self.record_every = n;
        self
    }

    pub fn store_states(mut self, store: bool) -> Self {
        self.store_states = store;
        self
    }

    pub fn observe(mut self, name: impl Into<String>, op: Operator) -> Self {
        self.observables.push((name.into(), op));
        self
    }

    /// Drops observables and intermediate records; only the final state matters.
    pub fn final_state_only(mut self) -> Self {
        self.record_every = 0;
        self.store_states = false;
        self.observables.clear();
        self
    }
}

/// Default step: 1/200 of the fastest period among model frequencies and the drive timescale.
pub fn default_dt(omega_max: f64, drive_timescale: Option<f64>) -> f64 {
    let mut period = 2.0 * PI / omega_max;
    if let Some(tau) = drive_timescale {
        period = period.min(tau);
    }
    period / 200.0
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub states: Vec<Array1<C64>>,
    pub expectations: Vec<(String, Vec<f64>)>,
    pub steps: usize,
    pub step_size: f64,
    /// Largest `|‖ψ‖ - 1|` seen at any step, recorded or not.
    pub max_norm_drift: f64,
    final_state: Array1<C64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &Array1<C64> {
        &self.final_state
    }

    pub fn into_final_state(self) -> Array1<C64> {
        self.final_state
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.expectations
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// `|⟨ψ|χ⟩|`.
pub fn fidelity(psi: &Array1<C64>, chi: &Array1<C64>) -> f64 {
    inner(psi, chi).norm()
}

/// `⟨ψ(t)|O|ψ(t)⟩` over the stored states of a trajectory.
pub fn expectation_series(traj: &Trajectory, op: &Operator) -> Result<Vec<C64>> {
    if traj.states.len() != traj.times.len() {
        return Err(Error::invalid(
            "trajectory",
            "states were not stored; enable store_states",
        ));
    }
    traj.states
        .iter()
        .map(|psi| {
            if psi.len() != op.dim() {
                Err(Error::DimensionMismatch {
                    left: psi.len(),
                    right: op.dim(),
                })
            } else {
                Ok(op.expectation(psi))
            }
        })
        .collect()
}

const KRYLOV_MAX_DIM: usize = 60;

/// `exp(-i dt H) ψ` for Hermitian `H`, via Lanczos with adaptive substeps.
pub fn expm_apply(h: &Operator, psi: &Array1<C64>, dt: f64, tol: f64) -> Result<Array1<C64>> {
    if psi.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: psi.len(),
            right: h.dim(),
        });
    }
    let mut pieces = 1usize;
    loop {
        let sub = dt / pieces as f64;
        let mut out = psi.clone();
        let mut converged = true;
        for _ in 0..pieces {
            match lanczos_step(h.matrix(), &out, sub, tol / pieces as f64)? {
                Some(next) => out = next,
                None => {
                    converged = false;
                    break;
                }
            }
        }
        if converged {
            return Ok(out);
        }
        pieces *= 2;
        if pieces > 1 << 20 {
            return Err(Error::Linalg(
                "Krylov exponential failed to converge".to_string(),
            ));
        }
    }
}

fn lanczos_step(
    h: &Array2<C64>,
    psi: &Array1<C64>,
    dt: f64,
    tol: f64,
) -> Result<Option<Array1<C64>>> {
    let beta0 = norm(psi);
    if beta0 == 0.0 {
        return Ok(Some(psi.clone()));
    }
    let m_max = KRYLOV_MAX_DIM.min(psi.len());
    let mut basis: Vec<Array1<C64>> = vec![psi.mapv(|z| z / beta0)];
    let mut diag: Vec<f64> = Vec::new();
    let mut off: Vec<f64> = Vec::new();
    for j in 0..m_max {
        let mut w = h.dot(&basis[j]);
        let a = inner(&basis[j], &w).re;
        diag.push(a);
        w.scaled_add(C64::new(-a, 0.0), &basis[j]);
        if j > 0 {
            w.scaled_add(C64::new(-off[j - 1], 0.0), &basis[j - 1]);
        }
        for _ in 0..2 {
            for v in &basis {
                let overlap = inner(v, &w);
                w.scaled_add(-overlap, v);
            }
        }
        let b = norm(&w);
        let y = small_exp(&diag, &off, dt)?;
        let scale = diag.iter().fold(0.0_f64, |acc, d| acc.max(d.abs())).max(b);
        let exhausted = b <= 1e-13 * scale.max(f64::MIN_POSITIVE) || j + 1 == psi.len();
        if exhausted || beta0 * b * dt * y[j].norm() < tol {
            let mut out = Array1::<C64>::zeros(psi.len());
            for (v, &c) in basis.iter().zip(y.iter()) {
                out.scaled_add(c * beta0, v);
            }
            return Ok(Some(out));
        }
        off.push(b);
        basis.push(w.mapv(|z| z / b));
    }
    Ok(None)
}

/// First column of `exp(-i dt T)` for the symmetric tridiagonal `T`.
fn small_exp(diag: &[f64], off: &[f64], dt: f64) -> Result<Vec<C64>> {
    let k = diag.len();
    let mut t = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = diag[i];
        if i + 1 < k {
            t[[i, i + 1]] = off[i];
            t[[i + 1, i]] = off[i];
        }
    }
    let (values, q) = t.eigh(UPLO::Lower)?;
    let phases: Vec<C64> = values
        .iter()
        .map(|&lam| C64::from_polar(1.0, -dt * lam))
        .collect();
    Ok((0..k)
        .map(|i| {
            (0..k)
                .map(|l| phases[l] * (q[[i, l]] * q[[0, l]]))
                .sum::<C64>()
        })
        .collect())
}

fn rk4_step(h: &TimeDependentHamiltonian, psi: &Array1<C64>, t: f64, dt: f64) -> Result<Array1<C64>> {
    let minus_i = C64::new(0.0, -1.0);
    let h0 = sample(h, t)?;
    let hm = sample(h, t + 0.5 * dt)?;
    let h1 = sample(h, t + dt)?;
    let k1 = h0.apply(psi).mapv(|z| z * minus_i);
    let k2 = hm.apply(&(psi + &k1.mapv(|z| z * (0.5 * dt)))).mapv(|z| z * minus_i);
    let k3 = hm.apply(&(psi + &k2.mapv(|z| z * (0.5 * dt)))).mapv(|z| z * minus_i);
    let k4 = h1.apply(&(psi + &k3.mapv(|z| z * dt))).mapv(|z| z * minus_i);
    let mut out = psi.clone();
    out.scaled_add(C64::new(dt / 6.0, 0.0), &k1);
    out.scaled_add(C64::new(dt / 3.0, 0.0), &k2);
    out.scaled_add(C64::new(dt / 3.0, 0.0), &k3);
    out.scaled_add(C64::new(dt / 6.0, 0.0), &k4);
    Ok(out)
}

fn sample(h: &TimeDependentHamiltonian, t: f64) -> Result<Operator> {
    let op = h.at(t);
    op.require_hermitian()?;
    Ok(op)
}

/// Integrates from `t0` to `t1` in uniform steps no longer than `options.dt`.
pub fn propagate(
    h: &TimeDependentHamiltonian,
    psi0: &Array1<C64>,
    t0: f64,
    t1: f64,
    options: &PropagationOptions,
) -> Result<Trajectory> {
    if !(options.dt.is_finite() && options.dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {}", options.dt)));
    }
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(Error::invalid("t1", format!("need finite t1 ≥ t0, got [{t0}, {t1}]")));
    }
    if psi0.len() != h.dim() {
        return Err(Error::DimensionMismatch {
            left: psi0.len(),
            right: h.dim(),
        });
    }
    let n0 = norm(psi0);
    if (n0 - 1.0).abs() > 1e-8 {
        return Err(Error::invalid("psi0", format!("must be normalized, norm = {n0}")));
    }
    for (name, op) in &options.observables {
        if op.dim() != h.dim() {
            return Err(Error::invalid(
                format!("observable {name}"),
                format!("dimension {} does not match {}", op.dim(), h.dim()),
            ));
        }
    }

    let span = t1 - t0;
    let steps = if span == 0.0 {
        0
    } else {
        (span / options.dt).ceil().max(1.0) as usize
    };
    let step = if steps == 0 { 0.0 } else { span / steps as f64 };

    let mut traj = Trajectory {
        times: Vec::new(),
        norms: Vec::new(),
        states: Vec::new(),
        expectations: options
            .observables
            .iter()
            .map(|(name, _)| (name.clone(), Vec::new()))
            .collect(),
        steps,
        step_size: step,
        max_norm_drift: (n0 - 1.0).abs(),
        final_state: psi0.clone(),
    };
    let record = |traj: &mut Trajectory, t: f64, psi: &Array1<C64>, nrm: f64| {
        traj.times.push(t);
        traj.norms.push(nrm);
        for ((_, series), (_, op)) in traj.expectations.iter_mut().zip(&options.observables) {
            series.push(op.expectation(psi).re);
        }
        if options.store_states {
            traj.states.push(psi.clone());
        }
    };
    record(&mut traj, t0, psi0, n0);

    let mut psi = psi0.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * step;
        psi = match options.method {
            Method::MidpointExp => {
                let hm = sample(h, t + 0.5 * step)?;
                expm_apply(&hm, &psi, step, options.krylov_tol)?
            }
            Method::Rk4 => rk4_step(h, &psi, t, step)?,
        };
        let t_next = if k + 1 == steps { t1 } else { t + step };
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteState { t: t_next });
        }
        let nrm = norm(&psi);
        traj.max_norm_drift = traj.max_norm_drift.max((nrm - 1.0).abs());
        let due = options.record_every > 0 && (k + 1) % options.record_every == 0;
        if due || k + 1 == steps {
            record(&mut traj, t_next, &psi, nrm);
        }
    }
    traj.final_state = psi;
    Ok(traj)
}
