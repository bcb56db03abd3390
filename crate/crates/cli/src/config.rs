//! Scenario configuration: JSON schema, defaults and validation.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use gaugekit::circuit::CircuitSpec;
use gaugekit::dipole::DipoleSpec;
use gaugekit::drive::DriveSignal;
use gaugekit::lineshape::ModeGrid;
use gaugekit::operator::GridBasis;
use gaugekit::propagation::Method;
use gaugekit::Execution;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Circuit,
    Dipole,
    Lineshape,
    Verify,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub circuit: Option<CircuitBlock>,
    #[serde(default)]
    pub dipole: Option<DipoleBlock>,
    #[serde(default)]
    pub lineshape: Option<LineshapeBlock>,
    #[serde(default)]
    pub gauge_list: Option<Vec<f64>>,
    #[serde(default)]
    pub drive: Option<DriveSignal>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub verify: VerifyBlock,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitBlock {
    pub c0: f64,
    pub c1: f64,
    #[serde(default = "one")]
    pub ej0: f64,
    #[serde(default = "one")]
    pub ej1: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleBlock {
    #[serde(default = "one")]
    pub mass: f64,
    pub charge: f64,
    pub omega0: f64,
    pub omega_c: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineshapeBlock {
    #[serde(default = "one")]
    pub omega_eg: f64,
    #[serde(default = "default_gamma_ratio")]
    pub gamma_ratio: f64,
    /// Half-width of the mode band as a fraction of `omega_eg`.
    #[serde(default = "default_band")]
    pub band: f64,
    #[serde(default = "default_n_modes")]
    pub n_modes: usize,
    /// Run length in units of `1/Γ`.
    #[serde(default = "default_t_decay")]
    pub t_decay: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub sudden_switch: bool,
}

impl Default for LineshapeBlock {
    fn default() -> Self {
        LineshapeBlock {
            omega_eg: 1.0,
            gamma_ratio: default_gamma_ratio(),
            band: default_band(),
            n_modes: default_n_modes(),
            t_decay: default_t_decay(),
            dt: None,
            sudden_switch: false,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    #[serde(default = "default_fock")]
    pub n_matter: usize,
    #[serde(default = "default_fock")]
    pub n_field: usize,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub t1: Option<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_residual_samples")]
    pub residual_samples: usize,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            grid_points: default_grid_points(),
            half_width: default_half_width(),
            n_matter: default_fock(),
            n_field: default_fock(),
            dt: None,
            t0: None,
            t1: None,
            record_every: default_record_every(),
            residual_samples: default_residual_samples(),
            method: Method::default(),
            execution: Execution::default(),
        }
    }
}

/// Test-only mutations of the verification suite.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    /// Drop `X_α` from every "correct" Hamiltonian.
    #[serde(default)]
    pub skip_correction: bool,
}

fn one() -> f64 {
    1.0
}
fn default_gamma_ratio() -> f64 {
    0.01
}
fn default_band() -> f64 {
    0.9
}
fn default_n_modes() -> usize {
    2000
}
fn default_t_decay() -> f64 {
    15.0
}
fn default_grid_points() -> usize {
    256
}
fn default_half_width() -> f64 {
    4.0 * PI
}
fn default_fock() -> usize {
    16
}
fn default_record_every() -> usize {
    10
}
fn default_residual_samples() -> usize {
    5
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            CliError::Config {
                field: (path != ".").then_some(path),
                message: err.into_inner().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    /// The configuration used by `verify` when no file is given.
    pub fn verify_default() -> Self {
        ScenarioConfig {
            experiment: Experiment::Verify,
            circuit: None,
            dipole: None,
            lineshape: None,
            gauge_list: None,
            drive: None,
            numerics: Numerics::default(),
            output: None,
            verify: VerifyBlock::default(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(list) = &self.gauge_list {
            if list.is_empty() {
                return Err(CliError::config("gauge_list", "must contain at least one α"));
            }
            if let Some(i) = list.iter().position(|a| !a.is_finite()) {
                return Err(CliError::config(format!("gauge_list[{i}]"), "must be finite"));
            }
        }
        if let Some(drive) = &self.drive {
            drive.validate().map_err(|e| CliError::scoped("drive", e))?;
        }
        let n = &self.numerics;
        if let Some(dt) = n.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::config("numerics.dt", format!("must be positive, got {dt}")));
            }
        }
        if n.record_every == 0 {
            return Err(CliError::config("numerics.record_every", "must be at least 1"));
        }
        if n.residual_samples == 0 {
            return Err(CliError::config("numerics.residual_samples", "must be at least 1"));
        }
        match self.experiment {
            Experiment::Circuit => {
                self.circuit_spec()?;
            }
            Experiment::Dipole => {
                self.dipole_spec()?;
            }
            Experiment::Lineshape => {
                self.mode_grid()?;
            }
            Experiment::Verify => {}
        }
        if self.experiment != Experiment::Verify && self.gauge_list.is_none() {
            return Err(CliError::config("gauge_list", "required for run experiments"));
        }
        let (t0, t1) = self.window();
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(CliError::config("numerics.t1", format!("window [{t0}, {t1}] is empty")));
        }
        Ok(())
    }

    pub fn gauges(&self) -> Vec<f64> {
        self.gauge_list.clone().unwrap_or_else(|| vec![0.0, 0.25, 1.0])
    }

    /// External drive; defaults to `0.4 sin t` for circuits and a `v = 1, w = 2` pulse for dipoles.
    pub fn drive(&self) -> DriveSignal {
        self.drive.clone().unwrap_or_else(|| match self.experiment {
            Experiment::Dipole => DriveSignal::gaussian_pulse(1.0, 2.0),
            _ => DriveSignal::sinusoid(0.4, 1.0),
        })
    }

    /// Propagation window; two periods of the default drive for circuits.
    pub fn window(&self) -> (f64, f64) {
        let (t0, t1) = match self.experiment {
            Experiment::Dipole => (-8.0, 8.0),
            _ => (0.0, 4.0 * PI),
        };
        (self.numerics.t0.unwrap_or(t0), self.numerics.t1.unwrap_or(t1))
    }

    pub fn dt(&self) -> f64 {
        self.numerics.dt.unwrap_or(0.05)
    }

    pub fn circuit_spec(&self) -> Result<CircuitSpec, CliError> {
        let block = self
            .circuit
            .as_ref()
            .ok_or_else(|| CliError::config("circuit", "block required for experiment \"circuit\""))?;
        let basis = GridBasis::new(self.numerics.grid_points, self.numerics.half_width)
            .map_err(|e| CliError::scoped("numerics", e))?;
        let spec = CircuitSpec {
            c0: block.c0,
            c1: block.c1,
            ej0: block.ej0,
            ej1: block.ej1,
            flux: self.drive(),
            basis,
        };
        spec.validate().map_err(|e| CliError::scoped("circuit", e))?;
        Ok(spec)
    }

    pub fn dipole_spec(&self) -> Result<DipoleSpec, CliError> {
        let block = self
            .dipole
            .as_ref()
            .ok_or_else(|| CliError::config("dipole", "block required for experiment \"dipole\""))?;
        let spec = DipoleSpec {
            mass: block.mass,
            charge: block.charge,
            omega0: block.omega0,
            omega_c: block.omega_c,
            theta: block.theta,
            mu: self.drive(),
            n_matter: self.numerics.n_matter,
            n_field: self.numerics.n_field,
        };
        spec.validate().map_err(|e| {
            let scope = match &e {
                gaugekit::Error::InvalidParameter { field, .. }
                    if field == "n_matter" || field == "n_field" =>
                {
                    "numerics"
                }
                _ => "dipole",
            };
            CliError::scoped(scope, e)
        })?;
        Ok(spec)
    }

    pub fn lineshape_block(&self) -> LineshapeBlock {
        self.lineshape.clone().unwrap_or_default()
    }

    pub fn mode_grid(&self) -> Result<ModeGrid, CliError> {
        let block = self.lineshape_block();
        if !(block.omega_eg.is_finite() && block.omega_eg > 0.0) {
            return Err(CliError::config("lineshape.omega_eg", "must be positive"));
        }
        if !(block.gamma_ratio > 0.0 && block.gamma_ratio <= gaugekit::lineshape::MAX_GAMMA_RATIO) {
            return Err(CliError::config(
                "lineshape.gamma_ratio",
                format!(
                    "must lie in (0, {}], got {}",
                    gaugekit::lineshape::MAX_GAMMA_RATIO,
                    block.gamma_ratio
                ),
            ));
        }
        if !(block.t_decay.is_finite() && block.t_decay > 0.0) {
            return Err(CliError::config("lineshape.t_decay", "must be positive"));
        }
        if let Some(dt) = block.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(CliError::config("lineshape.dt", "must be positive"));
            }
        }
        let grid = ModeGrid::centered(block.omega_eg, block.band, block.n_modes)
            .map_err(|e| CliError::scoped("lineshape", e))?;
        grid.check_covers(block.omega_eg, block.gamma_ratio * block.omega_eg)
            .map_err(|e| CliError::scoped("lineshape", e))?;
        Ok(grid)
    }
}
