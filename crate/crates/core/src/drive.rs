//! Scalar control signals with analytic time derivatives.
//!
//! These carry the external flux φ(t) of the circuit and the mode-function
//! profile μ(t) seen by the moving dipole.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveSignal {
    Constant {
        value: f64,
    },
    LinearRamp {
        slope: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude · ½(1 + tanh((t - center)/ramp_time)) + offset`.
    SmoothStep {
        #[serde(default = "one")]
        amplitude: f64,
        ramp_time: f64,
        #[serde(default)]
        center: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude · sin(frequency·t + phase) + offset`.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude · exp(-(speed·(t - center))² / width²)`: a mode profile swept at constant speed.
    GaussianPulse {
        #[serde(default = "one")]
        amplitude: f64,
        speed: f64,
        width: f64,
        #[serde(default)]
        center: f64,
    },
}

impl DriveSignal {
    pub fn constant(value: f64) -> Self {
        DriveSignal::Constant { value }
    }

    pub fn linear_ramp(slope: f64, offset: f64) -> Self {
        DriveSignal::LinearRamp { slope, offset }
    }

    pub fn smooth_step(ramp_time: f64) -> Self {
        DriveSignal::SmoothStep {
            amplitude: 1.0,
            ramp_time,
            center: 0.0,
            offset: 0.0,
        }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64) -> Self {
        DriveSignal::Sinusoid {
            amplitude,
            frequency,
            phase: 0.0,
            offset: 0.0,
        }
    }

    pub fn gaussian_pulse(speed: f64, width: f64) -> Self {
        DriveSignal::GaussianPulse {
            amplitude: 1.0,
            speed,
            width,
            center: 0.0,
        }
    }

    /// Returns `(value, derivative)` at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            DriveSignal::Constant { value } => (value, 0.0),
            DriveSignal::LinearRamp { slope, offset } => (slope * t + offset, slope),
            DriveSignal::SmoothStep {
                amplitude,
                ramp_time,
                center,
                offset,
            } => {
                let u = (t - center) / ramp_time;
                let cosh = u.cosh();
                (
                    amplitude * 0.5 * (1.0 + u.tanh()) + offset,
                    amplitude / (2.0 * ramp_time * cosh * cosh),
                )
            }
            DriveSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                let arg = frequency * t + phase;
                (
                    amplitude * arg.sin() + offset,
                    amplitude * frequency * arg.cos(),
                )
            }
            DriveSignal::GaussianPulse {
                amplitude,
                speed,
                width,
                center,
            } => {
                let s = speed * (t - center);
                let value = amplitude * (-(s * s) / (width * width)).exp();
                (value, -2.0 * speed * s / (width * width) * value)
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.eval(t).1
    }

    /// Characteristic time over which the signal changes, if it has one.
    pub fn timescale(&self) -> Option<f64> {
        match *self {
            DriveSignal::Constant { .. } | DriveSignal::LinearRamp { .. } => None,
            DriveSignal::SmoothStep { ramp_time, .. } => Some(ramp_time),
            DriveSignal::Sinusoid { frequency, .. } => {
                (frequency != 0.0).then(|| 2.0 * PI / frequency.abs())
            }
            DriveSignal::GaussianPulse { speed, width, .. } => Some(width / speed.abs()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(name, "must be finite"))
            }
        };
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        match *self {
            DriveSignal::Constant { value } => finite("value", value),
            DriveSignal::LinearRamp { slope, offset } => {
                finite("slope", slope)?;
                finite("offset", offset)
            }
            DriveSignal::SmoothStep {
                amplitude,
                ramp_time,
                center,
                offset,
            } => {
                finite("amplitude", amplitude)?;
                positive("ramp_time", ramp_time)?;
                finite("center", center)?;
                finite("offset", offset)
            }
            DriveSignal::Sinusoid {
                amplitude,
                frequency,
                phase,
                offset,
            } => {
                finite("amplitude", amplitude)?;
                finite("frequency", frequency)?;
                finite("phase", phase)?;
                finite("offset", offset)
            }
            DriveSignal::GaussianPulse {
                amplitude,
                speed,
                width,
                center,
            } => {
                finite("amplitude", amplitude)?;
                positive("speed", speed)?;
                positive("width", width)?;
                finite("center", center)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(DriveSignal::constant(0.7).eval(12.3), (0.7, 0.0));
        assert_eq!(DriveSignal::gaussian_pulse(1.0, 2.0).eval(0.0), (1.0, 0.0));
        let (v, d) = DriveSignal::linear_ramp(0.3, 0.1).eval(2.0);
        assert!((v - 0.7).abs() < 1e-15);
        assert_eq!(d, 0.3);
        let (v, d) = DriveSignal::smooth_step(0.5).eval(0.0);
        assert_eq!(v, 0.5);
        assert_eq!(d, 1.0);
        let (v, d) = DriveSignal::sinusoid(0.4, 1.0).eval(0.0);
        assert_eq!((v, d), (0.0, 0.4));
    }

    #[test]
    fn smooth_step_approaches_heaviside() {
        let step = DriveSignal::smooth_step(1e-3);
        assert!(step.value(-0.1) < 1e-12);
        assert!((step.value(0.1) - 1.0).abs() < 1e-12);
        assert_eq!(step.derivative(10.0), 0.0);
        assert!(step.derivative(1e4).is_finite());
    }

    #[test]
    fn serde_round_trip_and_unknown_keys() {
        let sig: DriveSignal =
            serde_json::from_str(r#"{"kind":"gaussian_pulse","speed":1.0,"width":2.0}"#).unwrap();
        assert_eq!(sig, DriveSignal::gaussian_pulse(1.0, 2.0));
        let text = serde_json::to_string(&sig).unwrap();
        assert_eq!(serde_json::from_str::<DriveSignal>(&text).unwrap(), sig);
        assert!(serde_json::from_str::<DriveSignal>(
            r#"{"kind":"constant","value":1.0,"bogus":2}"#
        )
        .is_err());
    }

    #[test]
    fn validation() {
        assert!(DriveSignal::smooth_step(0.0).validate().is_err());
        assert!(DriveSignal::gaussian_pulse(1.0, -2.0).validate().is_err());
        assert!(DriveSignal::constant(f64::NAN).validate().is_err());
        assert!(DriveSignal::sinusoid(0.4, 1.0).validate().is_ok());
    }

    #[test]
    fn timescales() {
        assert_eq!(DriveSignal::gaussian_pulse(2.0, 3.0).timescale(), Some(1.5));
        assert_eq!(DriveSignal::linear_ramp(1.0, 0.0).timescale(), None);
        let period = DriveSignal::sinusoid(1.0, 2.0).timescale().unwrap();
        assert!((period - PI).abs() < 1e-15);
    }
}
