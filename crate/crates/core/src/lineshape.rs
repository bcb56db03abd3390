//! Gauge-relative spontaneous-emission lineshapes.
//!
//! A two-level emitter couples to a ladder of modes in the single-excitation,
//! rotating-wave sector. Gauge α enters only through the coupling profile
//! `g_k = g0 [(1-α)ω_eg + αω_k] / √(ω_eg ω_k)`, whose resonant value is `g0` for
//! every α, so all gauges share one decay rate `Γ = 2π g0² / Δω`. The emitted
//! spectrum `S_num(ω_k) = (ω_k/ω_eg)² |c_k|² / Δω` then reproduces
//!
//! `S_α(ω) = (Γ/2π)(ω/ω_eg³)[(1-α)ω_eg + αω]² / ((ω - ω_eg)² + Γ²/4)`.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::operator::C64;

/// Largest `Γ/ω_eg` for which the Markov and rotating-wave treatment is trusted.
pub const MAX_GAMMA_RATIO: f64 = 0.05;

/// Evenly spaced modes `ω_k = ω_min + kΔω`, `k = 0..N`, with `Δω = (ω_max - ω_min)/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub n_modes: usize,
    pub omega_min: f64,
    pub omega_max: f64,
}

impl ModeGrid {
    pub fn new(n_modes: usize, omega_min: f64, omega_max: f64) -> Result<Self> {
        if n_modes < 2 {
            return Err(Error::invalid("n_modes", format!("need at least 2, got {n_modes}")));
        }
        if !(omega_min.is_finite() && omega_min > 0.0) {
            return Err(Error::invalid("omega_min", format!("must be positive, got {omega_min}")));
        }
        if !(omega_max.is_finite() && omega_max > omega_min) {
            return Err(Error::invalid(
                "omega_max",
                format!("must exceed omega_min = {omega_min}, got {omega_max}"),
            ));
        }
        Ok(ModeGrid {
            n_modes,
            omega_min,
            omega_max,
        })
    }

    /// Band `[ω_eg(1 - f), ω_eg(1 + f)]`; with even `N` mode `N/2` sits exactly at `ω_eg`.
    pub fn centered(omega_eg: f64, half_band_fraction: f64, n_modes: usize) -> Result<Self> {
        if !(half_band_fraction > 0.0 && half_band_fraction < 1.0) {
            return Err(Error::invalid(
                "band",
                format!("half-band fraction must lie in (0, 1), got {half_band_fraction}"),
            ));
        }
        ModeGrid::new(
            n_modes,
            omega_eg * (1.0 - half_band_fraction),
            omega_eg * (1.0 + half_band_fraction),
        )
    }

    pub fn spacing(&self) -> f64 {
        (self.omega_max - self.omega_min) / self.n_modes as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let d = self.spacing();
        (0..self.n_modes)
            .map(|k| self.omega_min + k as f64 * d)
            .collect()
    }

    /// Requires the band to cover `[ω_eg - 20Γ, ω_eg + 20Γ]`.
    pub fn check_covers(&self, omega_eg: f64, gamma: f64) -> Result<()> {
        let last = self.omega_min + (self.n_modes - 1) as f64 * self.spacing();
        if self.omega_min > omega_eg - 20.0 * gamma || last < omega_eg + 20.0 * gamma {
            return Err(Error::invalid(
                "band",
                format!(
                    "[{}, {last}] does not cover ω_eg ± 20Γ = [{}, {}]",
                    self.omega_min,
                    omega_eg - 20.0 * gamma,
                    omega_eg + 20.0 * gamma
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub omega_eg: f64,
    pub g0: f64,
    pub alpha: f64,
}

impl EmitterSpec {
    /// Emitter whose resonant coupling yields the decay rate `gamma` on `grid`.
    pub fn with_gamma(omega_eg: f64, gamma: f64, alpha: f64, grid: &ModeGrid) -> Self {
        EmitterSpec {
            omega_eg,
            g0: (gamma * grid.spacing() / (2.0 * PI)).sqrt(),
            alpha,
        }
    }

    /// `Γ = 2π g0² / Δω`.
    pub fn gamma(&self, grid: &ModeGrid) -> f64 {
        2.0 * PI * self.g0 * self.g0 / grid.spacing()
    }

    pub fn validate(&self, grid: &ModeGrid) -> Result<()> {
        if !(self.omega_eg.is_finite() && self.omega_eg > 0.0) {
            return Err(Error::invalid("omega_eg", "must be positive and finite"));
        }
        if !(self.g0.is_finite() && self.g0 >= 0.0) {
            return Err(Error::invalid("g0", "must be non-negative and finite"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha", "must be finite"));
        }
        let gamma = self.gamma(grid);
        if gamma > MAX_GAMMA_RATIO * self.omega_eg {
            return Err(Error::invalid(
                "gamma_ratio",
                format!(
                    "Γ/ω_eg = {:.3e} exceeds {MAX_GAMMA_RATIO}",
                    gamma / self.omega_eg
                ),
            ));
        }
        grid.check_covers(self.omega_eg, gamma)
    }

    pub fn couplings(&self, grid: &ModeGrid) -> Vec<f64> {
        grid.frequencies()
            .into_iter()
            .map(|w| coupling_profile(self.alpha, w, self.omega_eg, self.g0))
            .collect()
    }
}

/// Single-excitation amplitudes: emitter `c_e` and modes `c_k` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeState {
    pub t: f64,
    pub c_e: C64,
    pub c_k: Vec<C64>,
}

impl AmplitudeState {
    pub fn excited(n_modes: usize) -> Self {
        AmplitudeState {
            t: 0.0,
            c_e: C64::new(1.0, 0.0),
            c_k: vec![C64::new(0.0, 0.0); n_modes],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c_e.norm_sqr() + self.c_k.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub alpha: f64,
    pub note: String,
}

impl Spectrum {
    /// Grid point of largest `S`.
    pub fn peak(&self) -> (f64, f64) {
        self.omega
            .iter()
            .zip(&self.values)
            .fold((f64::NAN, f64::NEG_INFINITY), |best, (&w, &s)| {
                if s > best.1 {
                    (w, s)
                } else {
                    best
                }
            })
    }

    /// Value at the grid point nearest `omega`.
    pub fn value_near(&self, omega: f64) -> f64 {
        let (i, _) = self
            .omega
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (i, &w)| {
                let d = (w - omega).abs();
                if d < best.1 {
                    (i, d)
                } else {
                    best
                }
            });
        self.values[i]
    }

    /// Max `|S_self/S_reference - 1|` over grid points with `|ω - center| ≤ half_width`.
    pub fn max_relative_deviation(
        &self,
        reference: &Spectrum,
        center: f64,
        half_width: f64,
    ) -> Result<f64> {
        if self.omega.len() != reference.omega.len() {
            return Err(Error::DimensionMismatch {
                left: self.omega.len(),
                right: reference.omega.len(),
            });
        }
        let mut worst = 0.0_f64;
        let mut seen = false;
        for ((&w, &s), &r) in self.omega.iter().zip(&self.values).zip(&reference.values) {
            if (w - center).abs() <= half_width {
                worst = worst.max((s / r - 1.0).abs());
                seen = true;
            }
        }
        if !seen {
            return Err(Error::invalid("window", "no grid points inside the comparison window"));
        }
        Ok(worst)
    }
}

/// `[α + (1-α)ω_eg/ω]²`, the ratio `S_α(ω)/S_1(ω)`.
pub fn spectrum_ratio(alpha: f64, omega: f64, omega_eg: f64) -> f64 {
    (alpha + (1.0 - alpha) * omega_eg / omega).powi(2)
}

/// `g_k^α = g0 [(1-α)ω_eg + αω_k] / √(ω_eg ω_k)`.
pub fn coupling_profile(alpha: f64, omega_k: f64, omega_eg: f64, g0: f64) -> f64 {
    g0 * ((1.0 - alpha) * omega_eg + alpha * omega_k) / (omega_eg * omega_k).sqrt()
}

fn closed_form_value(alpha: f64, omega: f64, omega_eg: f64, gamma: f64) -> f64 {
    let bracket = (1.0 - alpha) * omega_eg + alpha * omega;
    gamma / (2.0 * PI) * omega / omega_eg.powi(3) * bracket * bracket
        / ((omega - omega_eg).powi(2) + 0.25 * gamma * gamma)
}

/// `S_α(ω)` evaluated on `omega_grid`.
pub fn closed_form_spectrum(
    alpha: f64,
    omega_grid: &[f64],
    omega_eg: f64,
    gamma: f64,
) -> Result<Spectrum> {
    if let Some(&bad) = omega_grid.iter().find(|&&w| w.is_nan() || w <= 0.0) {
        return Err(Error::invalid("omega", format!("grid must be positive, found {bad}")));
    }
    Ok(Spectrum {
        omega: omega_grid.to_vec(),
        values: omega_grid
            .iter()
            .map(|&w| closed_form_value(alpha, w, omega_eg, gamma))
            .collect(),
        alpha,
        note: "closed form".to_string(),
    })
}

/// Real part of the resonant self-energy, `Σ_k g_k² (ω_eg - ω_k) / ((ω_eg - ω_k)² + Γ²/4)`.
///
/// The discretized band shifts the emitter line by this amount; the bare
/// frequency is lowered by it so the dressed resonance sits at `ω_eg`.
pub fn lamb_shift(couplings: &[f64], frequencies: &[f64], omega_eg: f64, gamma: f64) -> f64 {
    couplings
        .iter()
        .zip(frequencies)
        .map(|(&g, &w)| {
            let d = omega_eg - w;
            g * g * d / (d * d + 0.25 * gamma * gamma)
        })
        .sum()
}

/// Step size resolving the largest detuning from resonance in the band.
pub fn default_emission_dt(grid: &ModeGrid, omega_eg: f64) -> f64 {
    let detuning = (grid.omega_max - omega_eg)
        .abs()
        .max((omega_eg - grid.omega_min).abs());
    0.1 / detuning
}

/// Options of an emission run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmissionRun {
    pub t_final: f64,
    pub dt: f64,
    /// Record `|c_e|²` every this many steps (0 disables the trace).
    pub trace_every: usize,
}

/// Final state plus the optional `(t, |c_e|²)` trace.
#[derive(Clone, Debug)]
pub struct EmissionOutcome {
    pub state: AmplitudeState,
    pub excited_trace: Vec<(f64, f64)>,
    pub bare_frequency: f64,
}

/// Propagates the single-excitation amplitudes from `initial` under gauge-α couplings.
///
/// Uses a Strang splitting in the frame rotating at `ω_eg`: exact free phases
/// and an exact rotation in the span of `|e⟩` and the bright mode `Σ g_k|k⟩`.
pub fn evolve_amplitudes(
    spec: &EmitterSpec,
    grid: &ModeGrid,
    initial: &AmplitudeState,
    run: &EmissionRun,
) -> Result<EmissionOutcome> {
    spec.validate(grid)?;
    if initial.c_k.len() != grid.n_modes {
        return Err(Error::DimensionMismatch {
            left: initial.c_k.len(),
            right: grid.n_modes,
        });
    }
    if !(run.t_final.is_finite() && run.t_final >= 0.0) {
        return Err(Error::invalid("t_decay", format!("must be non-negative, got {}", run.t_final)));
    }
    if !(run.dt.is_finite() && run.dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be positive, got {}", run.dt)));
    }
    let omega_eg = spec.omega_eg;
    let freqs = grid.frequencies();
    let max_detuning = freqs
        .iter()
        .map(|w| (w - omega_eg).abs())
        .fold(0.0, f64::max);
    if run.dt * max_detuning > 0.5 {
        return Err(Error::invalid(
            "dt",
            format!(
                "dt·max|ω_k - ω_eg| = {:.3} does not resolve the band (need ≤ 0.5)",
                run.dt * max_detuning
            ),
        ));
    }
    let recurrence = 2.0 * PI / grid.spacing();
    if run.t_final >= recurrence {
        return Err(Error::invalid(
            "t_decay",
            format!("T = {} reaches the mode recurrence time 2π/Δω = {recurrence}", run.t_final),
        ));
    }

    let g = spec.couplings(grid);
    let gamma = spec.gamma(grid);
    let shift = lamb_shift(&g, &freqs, omega_eg, gamma);
    let bare = omega_eg - shift;
    let g_norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();

    let steps = (run.t_final / run.dt).ceil() as usize;
    let tau = if steps == 0 { 0.0 } else { run.t_final / steps as f64 };
    let half_phase_k: Vec<C64> = freqs
        .iter()
        .map(|w| C64::from_polar(1.0, -0.5 * tau * (w - omega_eg)))
        .collect();
    let half_phase_e = C64::from_polar(1.0, -0.5 * tau * (bare - omega_eg));
    let (cos_r, sin_r) = ((g_norm * tau).cos(), (g_norm * tau).sin());
    let minus_i = C64::new(0.0, -1.0);

    // rotating-frame amplitudes
    let start = C64::from_polar(1.0, omega_eg * initial.t);
    let mut c_e = initial.c_e * start;
    let mut c_k: Vec<C64> = initial.c_k.iter().map(|c| c * start).collect();
    let mut trace = Vec::new();
    if run.trace_every > 0 {
        trace.push((initial.t, c_e.norm_sqr()));
    }

    for step in 0..steps {
        c_e *= half_phase_e;
        for (c, p) in c_k.iter_mut().zip(&half_phase_k) {
            *c *= p;
        }
        if g_norm > 0.0 {
            let beta: C64 = c_k.iter().zip(&g).map(|(c, &gk)| c * gk).sum::<C64>() / g_norm;
            let new_e = c_e * cos_r + minus_i * sin_r * beta;
            let new_beta = beta * cos_r + minus_i * sin_r * c_e;
            let delta = (new_beta - beta) / g_norm;
            for (c, &gk) in c_k.iter_mut().zip(&g) {
                *c += delta * gk;
            }
            c_e = new_e;
        }
        c_e *= half_phase_e;
        for (c, p) in c_k.iter_mut().zip(&half_phase_k) {
            *c *= p;
        }
        if run.trace_every > 0 && (step + 1) % run.trace_every == 0 {
            trace.push((initial.t + (step + 1) as f64 * tau, c_e.norm_sqr()));
        }
    }

    let t_end = initial.t + run.t_final;
    let back = C64::from_polar(1.0, -omega_eg * t_end);
    let state = AmplitudeState {
        t: t_end,
        c_e: c_e * back,
        c_k: c_k.iter().map(|c| c * back).collect(),
    };
    if !state.c_e.re.is_finite() || state.c_k.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::NonFiniteState { t: t_end });
    }
    let deviation = (state.norm_sqr() - initial.norm_sqr()).abs();
    if deviation > 1e-4 {
        return Err(Error::NormViolation {
            deviation,
            limit: 1e-4,
        });
    }
    Ok(EmissionOutcome {
        state,
        excited_trace: trace,
        bare_frequency: bare,
    })
}

/// Decay of the initially excited emitter up to time `t_final`.
pub fn simulate_emission(
    spec: &EmitterSpec,
    grid: &ModeGrid,
    t_final: f64,
    dt: f64,
) -> Result<AmplitudeState> {
    let run = EmissionRun {
        t_final,
        dt,
        trace_every: 0,
    };
    Ok(evolve_amplitudes(spec, grid, &AmplitudeState::excited(grid.n_modes), &run)?.state)
}

/// `S_num(ω_k) = (ω_k/ω_eg)² |c_k|² / Δω` from a decayed state.
pub fn numerical_spectrum(
    state: &AmplitudeState,
    grid: &ModeGrid,
    omega_eg: f64,
    alpha: f64,
) -> Result<Spectrum> {
    if state.c_k.len() != grid.n_modes {
        return Err(Error::DimensionMismatch {
            left: state.c_k.len(),
            right: grid.n_modes,
        });
    }
    let remaining = state.c_e.norm_sqr();
    if remaining >= 1e-4 {
        return Err(Error::invalid(
            "t_decay",
            format!("emitter not decayed: |c_e|² = {remaining:.3e} (need < 1e-4)"),
        ));
    }
    let dw = grid.spacing();
    let omega = grid.frequencies();
    let values = omega
        .iter()
        .zip(&state.c_k)
        .map(|(&w, c)| (w / omega_eg).powi(2) * c.norm_sqr() / dw)
        .collect();
    Ok(Spectrum {
        omega,
        values,
        alpha,
        note: "numerical, (ω/ω_eg)² density-of-states weight, absolute normalization".to_string(),
    })
}

/// Overall phase of the sudden-switch kick `c_k(0⁺) = phase · α λ_k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KickPhase {
    PlusOne,
    MinusOne,
    PlusI,
    MinusI,
}

impl KickPhase {
    pub const ALL: [KickPhase; 4] = [
        KickPhase::PlusOne,
        KickPhase::MinusOne,
        KickPhase::PlusI,
        KickPhase::MinusI,
    ];

    pub fn value(self) -> C64 {
        match self {
            KickPhase::PlusOne => C64::new(1.0, 0.0),
            KickPhase::MinusOne => C64::new(-1.0, 0.0),
            KickPhase::PlusI => C64::new(0.0, 1.0),
            KickPhase::MinusI => C64::new(0.0, -1.0),
        }
    }
}

impl fmt::Display for KickPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KickPhase::PlusOne => "+1",
            KickPhase::MinusOne => "-1",
            KickPhase::PlusI => "+i",
            KickPhase::MinusI => "-i",
        };
        f.write_str(s)
    }
}

/// `λ_k = g0 / √(ω_eg ω_k)`.
pub fn kick_scale(omega_k: f64, g0: f64, omega_eg: f64) -> f64 {
    g0 / (omega_eg * omega_k).sqrt()
}

/// Vacuum-source amplitude of mode `k` relative to the class base α = 0:
/// `(1-α) · phase · λ_k · e^{-iω_k t}`.
pub fn vacuum_source_delta(
    alpha: f64,
    omega_k: f64,
    g0: f64,
    omega_eg: f64,
    t: f64,
    phase: KickPhase,
) -> C64 {
    phase.value() * ((1.0 - alpha) * kick_scale(omega_k, g0, omega_eg)) * C64::from_polar(1.0, -omega_k * t)
}

/// Initial state just after a sudden switch-on in gauge α: modes kicked by
/// `phase · α λ_k`, emitter amplitude reduced to keep the state normalized.
pub fn kicked_state(spec: &EmitterSpec, grid: &ModeGrid, phase: KickPhase) -> Result<AmplitudeState> {
    let c_k: Vec<C64> = grid
        .frequencies()
        .iter()
        .map(|&w| phase.value() * (spec.alpha * kick_scale(w, spec.g0, spec.omega_eg)))
        .collect();
    let photons: f64 = c_k.iter().map(|c| c.norm_sqr()).sum();
    if photons >= 1.0 {
        return Err(Error::invalid(
            "g0",
            format!("kick carries total weight {photons:.3} ≥ 1"),
        ));
    }
    Ok(AmplitudeState {
        t: 0.0,
        c_e: C64::new((1.0 - photons).sqrt(), 0.0),
        c_k,
    })
}

/// Spectrum of a gauge-α member of the class built on the Coulomb gauge.
pub fn sudden_switch_class_run(
    spec: &EmitterSpec,
    grid: &ModeGrid,
    t_final: f64,
    dt: f64,
    phase: KickPhase,
) -> Result<Spectrum> {
    let initial = kicked_state(spec, grid, phase)?;
    let run = EmissionRun {
        t_final,
        dt,
        trace_every: 0,
    };
    let outcome = evolve_amplitudes(spec, grid, &initial, &run)?;
    let mut spectrum = numerical_spectrum(&outcome.state, grid, spec.omega_eg, spec.alpha)?;
    spectrum.note = format!("sudden switch-on, class base α = 0, kick phase {phase}");
    Ok(spectrum)
}

/// Outcome of fixing the kick phase against the Coulomb-gauge closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickCalibration {
    pub phase: KickPhase,
    /// Max relative deviation from `S_0` over `ω_eg ± 5Γ` for every candidate.
    pub deviations: Vec<(KickPhase, f64)>,
    pub calibration_alpha: f64,
}

/// Tolerance for a kicked run to count as reproducing `S_0`.
pub const CLASS_TOLERANCE: f64 = 0.03;

/// Runs the kicked evolution at `calibration_alpha` for each candidate phase and
/// keeps the one closest to `S_0`.
pub fn calibrate_kick(
    omega_eg: f64,
    g0: f64,
    calibration_alpha: f64,
    grid: &ModeGrid,
    t_final: f64,
    dt: f64,
    exec: Execution,
) -> Result<KickCalibration> {
    let spec = EmitterSpec {
        omega_eg,
        g0,
        alpha: calibration_alpha,
    };
    let gamma = spec.gamma(grid);
    let reference = closed_form_spectrum(0.0, &grid.frequencies(), omega_eg, gamma)?;
    let deviations: Vec<(KickPhase, f64)> = exec.try_map(&KickPhase::ALL, |&phase| {
        let s = sudden_switch_class_run(&spec, grid, t_final, dt, phase)?;
        Ok::<_, Error>((phase, s.max_relative_deviation(&reference, omega_eg, 5.0 * gamma)?))
    })?;
    let (phase, best) = deviations
        .iter()
        .cloned()
        .fold((KickPhase::PlusOne, f64::INFINITY), |acc, (p, d)| {
            if d < acc.1 {
                (p, d)
            } else {
                acc
            }
        });
    if best > CLASS_TOLERANCE {
        return Err(Error::KickCalibration {
            best,
            limit: CLASS_TOLERANCE,
        });
    }
    Ok(KickCalibration {
        phase,
        deviations,
        calibration_alpha,
    })
}
