//! Every tunable constant of the simulator in one place.
//!
//! Parameters load from flat `key = value` lines with dotted keys, which is
//! a subset of TOML:
//!
//! ```text
//! fan.drag_k = "steady_state"   # or a number
//! pressure.r0 = 0.7
//! light.ir_sensitivity = [14000, 9000, 4000]
//! pid.target = 101335
//! ```
//!
//! Unset keys keep their defaults. The defaults reproduce the published
//! model constants; the sensor and coupling constants are plausible
//! stand-ins for quantities that were only described qualitatively.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::models::{
    BernoulliParams, ColorFidelity, DragConstant, FanParams, ImageModelParams, MalusParams,
    ModelError, PressureParams,
};

#[derive(Debug, Error)]
pub enum ParamsError {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown parameter '{0}'")]
    UnknownKey(String),
    #[error("parameter '{key}': {message}")]
    BadValue { key: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraParams {
    pub fidelity: ColorFidelity,
    /// Image side length in pixels.
    pub size: usize,
    /// Exposure factor at ISO 500, 1/1000 s, f/5.6.
    pub exposure_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogNoise {
    /// Gaussian noise per raw reading, volts.
    pub sigma: f64,
    /// Supply ripple amplitude, volts.
    pub ripple: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightParams {
    pub sigma0: f64,
    pub sigma1: f64,
    /// Counts at unit gain per fully lit red, green, blue channel.
    pub ir_sensitivity: [f64; 3],
    pub vis_sensitivity: [f64; 3],
    /// Attenuation seen by the sensor behind the first polarizer only.
    pub sensor2_factor: f64,
    /// LED contribution `a (exp(b L / 255) - 1)`, counts at unit gain.
    pub led_a: f64,
    pub led_b: f64,
    /// Drawn current, A: idle plus per fully lit channel.
    pub current_idle: f64,
    pub current_rgb: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarometerParams {
    pub sigma: f64,
    pub resolution: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MicParams {
    pub baseline: f64,
    /// Volts per unit speaker amplitude.
    pub speaker_gain: f64,
    /// Volts at both fans at full speed.
    pub fan_gain: f64,
    /// Fractional damping of the whole signal with the hatch fully open.
    pub hatch_damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingParams {
    /// Relative speed-up of one fan when the other runs at full speed.
    pub fan: f64,
    /// Fraction of `fan` lost with the hatch fully open.
    pub hatch: f64,
    /// Fraction of the other fan's extra current drawn away from a fan.
    pub supply: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntakeParams {
    /// Pressure drop at the intake with the intake fan at full speed, Pa.
    pub k_in: f64,
    pub k_out: f64,
    /// Fraction of `k_in` relieved with the hatch fully open.
    pub hatch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Target downwind pressure, Pa. `None` uses the first measurement.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub fan: FanParams,
    pub pressure: PressureParams,
    pub bernoulli: BernoulliParams,
    pub malus: MalusParams,
    pub image: ImageModelParams,
    pub camera: CameraParams,
    pub analog: AnalogNoise,
    pub light: LightParams,
    pub barometer: BarometerParams,
    pub tachometer_jitter: f64,
    /// Angle-sensor counts at 0 degrees.
    pub angle_zero: [f64; 2],
    pub mic: MicParams,
    pub coupling: CouplingParams,
    pub intake: IntakeParams,
    /// Random-walk drift of the ambient pressure, Pa per sqrt(s). 0 = off.
    pub ambient_drift: f64,
    pub pid: PidParams,
    /// Integration step of the fan dynamics, s.
    pub dt: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            fan: FanParams::default(),
            pressure: PressureParams::default(),
            bernoulli: BernoulliParams::default(),
            malus: MalusParams::default(),
            image: ImageModelParams::default(),
            camera: CameraParams { fidelity: ColorFidelity::F3, size: 64, exposure_ref: 3.0 },
            analog: AnalogNoise { sigma: 0.002, ripple: 0.01 },
            light: LightParams {
                sigma0: 2.0,
                sigma1: 0.005,
                ir_sensitivity: [14_000.0, 9_000.0, 4_000.0],
                vis_sensitivity: [8_000.0, 12_000.0, 10_000.0],
                sensor2_factor: 0.45,
                led_a: 10.0,
                led_b: 3.0,
                current_idle: 0.05,
                current_rgb: [0.1, 0.1, 0.1],
            },
            barometer: BarometerParams { sigma: 1.0, resolution: 2.62 },
            tachometer_jitter: 2e-4,
            angle_zero: [507.0, 512.0],
            mic: MicParams { baseline: 0.3, speaker_gain: 1.0, fan_gain: 1.2, hatch_damping: 0.4 },
            coupling: CouplingParams { fan: 0.1, hatch: 0.5, supply: 0.1 },
            intake: IntakeParams { k_in: 10.0, k_out: 4.0, hatch: 0.6 },
            ambient_drift: 0.0,
            pid: PidParams { kp: 0.5, ki: 0.1, kd: 1e-3, target: None },
            dt: 1e-3,
        }
    }
}

enum Value {
    Num(f64),
    List(Vec<f64>),
    Text(String),
}

fn num(key: &str, v: &toml::Value) -> Result<f64, ParamsError> {
    match v {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(ParamsError::BadValue { key: key.into(), message: "expected a number".into() }),
    }
}

fn list<const N: usize>(key: &str, v: &toml::Value) -> Result<[f64; N], ParamsError> {
    let bad = || ParamsError::BadValue { key: key.into(), message: format!("expected {N} numbers") };
    let arr = v.as_array().ok_or_else(bad)?;
    if arr.len() != N {
        return Err(bad());
    }
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(arr) {
        *o = num(key, x)?;
    }
    Ok(out)
}

fn text<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str, ParamsError> {
    v.as_str()
        .ok_or_else(|| ParamsError::BadValue { key: key.into(), message: "expected a string".into() })
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

impl Params {
    pub fn from_config_str(text: &str) -> Result<Params, ParamsError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            ParamsError::Syntax(e.to_string().trim_end().to_string())
        })?;
        let mut entries = Vec::new();
        flatten("", &table, &mut entries);
        let mut p = Params::default();
        for (key, value) in &entries {
            p.apply(key, value)?;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Params, ParamsError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ParamsError::Io { path: path.display().to_string(), source })?;
        Params::from_config_str(&text)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        self.fan.validate()?;
        self.pressure.validate()?;
        self.malus.validate()?;
        self.image.validate()?;
        let bad = |key: &str, message: &str| {
            Err(ParamsError::BadValue { key: key.into(), message: message.into() })
        };
        if !(self.dt > 0.0) {
            return bad("engine.dt", "must be > 0");
        }
        if self.camera.size < crate::models::light::MIN_RASTER_SIZE {
            return bad("camera.size", "must be at least 16");
        }
        if !(self.camera.exposure_ref > 0.0) {
            return bad("camera.exposure_ref", "must be > 0");
        }
        let nonneg = [
            ("analog.sigma", self.analog.sigma),
            ("analog.ripple", self.analog.ripple),
            ("light.sigma0", self.light.sigma0),
            ("light.sigma1", self.light.sigma1),
            ("barometer.sigma", self.barometer.sigma),
            ("barometer.resolution", self.barometer.resolution),
            ("tachometer.jitter", self.tachometer_jitter),
            ("ambient.drift", self.ambient_drift),
        ];
        for (key, v) in nonneg {
            if !(v >= 0.0) {
                return bad(key, "must be >= 0");
            }
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, v: &toml::Value) -> Result<(), ParamsError> {
        let n = || num(key, v);
        match key {
            "fan.omega_max" => self.fan.omega_max = n()?,
            "fan.l_min" => self.fan.l_min = n()?,
            "fan.c_max" => self.fan.c_max = n()?,
            "fan.c_min" => self.fan.c_min = n()?,
            "fan.inertia" => self.fan.inertia = n()?,
            "fan.torque_const" => self.fan.torque_const = n()?,
            "fan.drag_k" => {
                self.fan.drag = match v {
                    toml::Value::String(s) if s == "steady_state" => DragConstant::SteadyState,
                    _ => DragConstant::Fixed(n()?),
                }
            }
            "pressure.s_max" => self.pressure.s_max = n()?,
            "pressure.q_max" => self.pressure.q_max = n()?,
            "pressure.r0" => self.pressure.r0 = n()?,
            "pressure.beta" => self.pressure.beta = n()?,
            "pressure.p_amb" => self.pressure.p_amb = n()?,
            "bernoulli.rho" => self.bernoulli.rho = n()?,
            "bernoulli.area" => self.bernoulli.area = n()?,
            "bernoulli.delta" => self.bernoulli.delta = n()?,
            "bernoulli.q_max" => self.bernoulli.q_max = n()?,
            "bernoulli.omega_max" => self.bernoulli.omega_max = n()?,
            "malus.i0" => self.malus.i0 = n()?,
            "malus.tp" => self.malus.tp = n()?,
            "malus.tc" => self.malus.tc = n()?,
            "image.sensor_matrix" => {
                let m: [f64; 9] = list(key, v)?;
                for r in 0..3 {
                    self.image.sensor_matrix[r].copy_from_slice(&m[3 * r..3 * r + 3]);
                }
            }
            "image.white_balance" => self.image.white_balance = list(key, v)?,
            "image.exposure" => self.image.exposure = n()?,
            "image.tp" => self.image.tp_rgb = list(key, v)?,
            "image.tc" => self.image.tc_rgb = list(key, v)?,
            "camera.fidelity" => self.camera.fidelity = text(key, v)?.parse()?,
            "camera.size" => {
                let s = n()?;
                if s.fract() != 0.0 || s < 0.0 {
                    return Err(ParamsError::BadValue {
                        key: key.into(),
                        message: "expected a pixel count".into(),
                    });
                }
                self.camera.size = s as usize;
            }
            "camera.exposure_ref" => self.camera.exposure_ref = n()?,
            "analog.sigma" => self.analog.sigma = n()?,
            "analog.ripple" => self.analog.ripple = n()?,
            "light.sigma0" => self.light.sigma0 = n()?,
            "light.sigma1" => self.light.sigma1 = n()?,
            "light.ir_sensitivity" => self.light.ir_sensitivity = list(key, v)?,
            "light.vis_sensitivity" => self.light.vis_sensitivity = list(key, v)?,
            "light.sensor2_factor" => self.light.sensor2_factor = n()?,
            "light.led_a" => self.light.led_a = n()?,
            "light.led_b" => self.light.led_b = n()?,
            "light.current_idle" => self.light.current_idle = n()?,
            "light.current_rgb" => self.light.current_rgb = list(key, v)?,
            "barometer.sigma" => self.barometer.sigma = n()?,
            "barometer.resolution" => self.barometer.resolution = n()?,
            "tachometer.jitter" => self.tachometer_jitter = n()?,
            "angle.zero" => self.angle_zero = list(key, v)?,
            "mic.baseline" => self.mic.baseline = n()?,
            "mic.speaker_gain" => self.mic.speaker_gain = n()?,
            "mic.fan_gain" => self.mic.fan_gain = n()?,
            "mic.hatch_damping" => self.mic.hatch_damping = n()?,
            "coupling.fan" => self.coupling.fan = n()?,
            "coupling.hatch" => self.coupling.hatch = n()?,
            "coupling.supply" => self.coupling.supply = n()?,
            "intake.k_in" => self.intake.k_in = n()?,
            "intake.k_out" => self.intake.k_out = n()?,
            "intake.hatch" => self.intake.hatch = n()?,
            "ambient.drift" => self.ambient_drift = n()?,
            "pid.kp" => self.pid.kp = n()?,
            "pid.ki" => self.pid.ki = n()?,
            "pid.kd" => self.pid.kd = n()?,
            "pid.target" => {
                self.pid.target = match v {
                    toml::Value::String(s) if s == "first_measurement" => None,
                    _ => Some(n()?),
                }
            }
            "engine.dt" => self.dt = n()?,
            _ => return Err(ParamsError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, Value)> {
        use Value::{List as L, Num as N, Text as T};
        let drag = match self.fan.drag {
            DragConstant::SteadyState => T("steady_state".into()),
            DragConstant::Fixed(k) => N(k),
        };
        let target = match self.pid.target {
            Some(t) => N(t),
            None => T("first_measurement".into()),
        };
        vec![
            ("fan.omega_max", N(self.fan.omega_max)),
            ("fan.l_min", N(self.fan.l_min)),
            ("fan.c_max", N(self.fan.c_max)),
            ("fan.c_min", N(self.fan.c_min)),
            ("fan.inertia", N(self.fan.inertia)),
            ("fan.torque_const", N(self.fan.torque_const)),
            ("fan.drag_k", drag),
            ("pressure.s_max", N(self.pressure.s_max)),
            ("pressure.q_max", N(self.pressure.q_max)),
            ("pressure.r0", N(self.pressure.r0)),
            ("pressure.beta", N(self.pressure.beta)),
            ("pressure.p_amb", N(self.pressure.p_amb)),
            ("bernoulli.rho", N(self.bernoulli.rho)),
            ("bernoulli.area", N(self.bernoulli.area)),
            ("bernoulli.delta", N(self.bernoulli.delta)),
            ("bernoulli.q_max", N(self.bernoulli.q_max)),
            ("bernoulli.omega_max", N(self.bernoulli.omega_max)),
            ("malus.i0", N(self.malus.i0)),
            ("malus.tp", N(self.malus.tp)),
            ("malus.tc", N(self.malus.tc)),
            ("image.sensor_matrix", L(self.image.sensor_matrix.concat())),
            ("image.white_balance", L(self.image.white_balance.to_vec())),
            ("image.exposure", N(self.image.exposure)),
            ("image.tp", L(self.image.tp_rgb.to_vec())),
            ("image.tc", L(self.image.tc_rgb.to_vec())),
            ("camera.fidelity", T(self.camera.fidelity.to_string())),
            ("camera.size", N(self.camera.size as f64)),
            ("camera.exposure_ref", N(self.camera.exposure_ref)),
            ("analog.sigma", N(self.analog.sigma)),
            ("analog.ripple", N(self.analog.ripple)),
            ("light.sigma0", N(self.light.sigma0)),
            ("light.sigma1", N(self.light.sigma1)),
            ("light.ir_sensitivity", L(self.light.ir_sensitivity.to_vec())),
            ("light.vis_sensitivity", L(self.light.vis_sensitivity.to_vec())),
            ("light.sensor2_factor", N(self.light.sensor2_factor)),
            ("light.led_a", N(self.light.led_a)),
            ("light.led_b", N(self.light.led_b)),
            ("light.current_idle", N(self.light.current_idle)),
            ("light.current_rgb", L(self.light.current_rgb.to_vec())),
            ("barometer.sigma", N(self.barometer.sigma)),
            ("barometer.resolution", N(self.barometer.resolution)),
            ("tachometer.jitter", N(self.tachometer_jitter)),
            ("angle.zero", L(self.angle_zero.to_vec())),
            ("mic.baseline", N(self.mic.baseline)),
            ("mic.speaker_gain", N(self.mic.speaker_gain)),
            ("mic.fan_gain", N(self.mic.fan_gain)),
            ("mic.hatch_damping", N(self.mic.hatch_damping)),
            ("coupling.fan", N(self.coupling.fan)),
            ("coupling.hatch", N(self.coupling.hatch)),
            ("coupling.supply", N(self.coupling.supply)),
            ("intake.k_in", N(self.intake.k_in)),
            ("intake.k_out", N(self.intake.k_out)),
            ("intake.hatch", N(self.intake.hatch)),
            ("ambient.drift", N(self.ambient_drift)),
            ("pid.kp", N(self.pid.kp)),
            ("pid.ki", N(self.pid.ki)),
            ("pid.kd", N(self.pid.kd)),
            ("pid.target", target),
            ("engine.dt", N(self.dt)),
        ]
    }

    /// Every parameter as a `key = value` line; parses back to `self`.
    pub fn to_config_string(&self) -> String {
        // `{:?}` keeps a decimal point or exponent, so TOML reads a float.
        let mut out = String::new();
        for (key, value) in self.entries() {
            match value {
                Value::Num(x) => writeln!(out, "{key} = {x:?}"),
                Value::List(xs) => {
                    let parts: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
                    writeln!(out, "{key} = [{}]", parts.join(", "))
                }
                Value::Text(s) => writeln!(out, "{key} = \"{s}\""),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Params::default().validate().unwrap();
        assert_eq!(Params::from_config_str("").unwrap(), Params::default());
    }

    #[test]
    fn dotted_keys_and_comments() {
        let p = Params::from_config_str(
            "# override a few\nfan.drag_k = 5.26e-8\npressure.r0 = 0.9\n\
             light.ir_sensitivity = [1, 2, 3]\npid.target = 101330\n",
        )
        .unwrap();
        assert_eq!(p.fan.drag, DragConstant::Fixed(5.26e-8));
        assert_eq!(p.pressure.r0, 0.9);
        assert_eq!(p.light.ir_sensitivity, [1.0, 2.0, 3.0]);
        assert_eq!(p.pid.target, Some(101_330.0));
    }

    #[test]
    fn round_trip() {
        let mut p = Params::default();
        p.fan.drag = DragConstant::Fixed(5.26e-8);
        p.pid.target = Some(101_335.25);
        p.camera.fidelity = ColorFidelity::F2;
        p.light.sigma0 = 0.1 + 0.2;
        let back = Params::from_config_str(&p.to_config_string()).unwrap();
        assert_eq!(back, p);
        let d = Params::default();
        assert_eq!(Params::from_config_str(&d.to_config_string()).unwrap(), d);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            Params::from_config_str("fan.colour = 1"),
            Err(ParamsError::UnknownKey(k)) if k == "fan.colour"
        ));
        assert!(matches!(
            Params::from_config_str("fan.l_min = \"x\""),
            Err(ParamsError::BadValue { .. })
        ));
        assert!(matches!(Params::from_config_str("fan.l_min = "), Err(ParamsError::Syntax(_))));
        assert!(matches!(Params::from_config_str("fan.l_min = 2"), Err(ParamsError::Model(_))));
        assert!(Params::from_config_str("light.current_rgb = [1, 2]").is_err());
        assert!(Params::from_config_str("camera.size = 8").is_err());
    }
}
