//! Variable tables for both chambers.
//!
//! Every actuator, sensor parameter and sensor measurement is listed here in
//! dataset column order. The `id` of a variable is its dataset column name and
//! doubles as the node id in the ground-truth graphs.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariableError {
    #[error("unknown chamber '{0}' (expected lt or wt)")]
    UnknownChamber(String),
    #[error("unknown configuration '{0}'")]
    UnknownConfig(String),
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("variable {id} is not part of the {chamber} chamber")]
    WrongChamber { id: String, chamber: Chamber },
    #[error("cannot SET sensor variable {0}")]
    NotSettable(String),
    #[error("value {value} out of range for {id} (expected {range})")]
    OutOfRange { id: String, value: f64, range: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Chamber {
    LightTunnel,
    WindTunnel,
}

impl Chamber {
    pub fn code(self) -> &'static str {
        match self {
            Chamber::LightTunnel => "lt",
            Chamber::WindTunnel => "wt",
        }
    }

    pub fn variables(self) -> &'static [ChamberVariable] {
        match self {
            Chamber::LightTunnel => LIGHT_TUNNEL,
            Chamber::WindTunnel => WIND_TUNNEL,
        }
    }

    /// Highest measurement rate the chamber supports, in Hz.
    pub fn max_rate_hz(self) -> f64 {
        match self {
            Chamber::LightTunnel => 10.0,
            Chamber::WindTunnel => 7.0,
        }
    }

    pub fn variable(self, id: &str) -> Result<&'static ChamberVariable, VariableError> {
        if let Some(v) = self.variables().iter().find(|v| v.id == id) {
            return Ok(v);
        }
        let other = match self {
            Chamber::LightTunnel => Chamber::WindTunnel,
            Chamber::WindTunnel => Chamber::LightTunnel,
        };
        if other.variables().iter().any(|v| v.id == id) {
            Err(VariableError::WrongChamber { id: id.to_string(), chamber: self })
        } else {
            Err(VariableError::UnknownVariable(id.to_string()))
        }
    }
}

impl fmt::Display for Chamber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Chamber::LightTunnel => "light tunnel",
            Chamber::WindTunnel => "wind tunnel",
        })
    }
}

impl FromStr for Chamber {
    type Err = VariableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lt" => Ok(Chamber::LightTunnel),
            "wt" => Ok(Chamber::WindTunnel),
            other => Err(VariableError::UnknownChamber(other.to_string())),
        }
    }
}

/// One of the four chamber configurations with a known ground-truth graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Config {
    LtStandard,
    LtCamera,
    WtStandard,
    WtPressureControl,
}

impl Config {
    pub const ALL: [Config; 4] = [
        Config::LtStandard,
        Config::LtCamera,
        Config::WtStandard,
        Config::WtPressureControl,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Config::LtStandard => "lt_standard",
            Config::LtCamera => "lt_camera",
            Config::WtStandard => "wt_standard",
            Config::WtPressureControl => "wt_pressure_control",
        }
    }

    /// Name used in the protocol header (`CHAMBER,<chamber>,<short name>`).
    pub fn short_name(self) -> &'static str {
        match self {
            Config::LtStandard | Config::WtStandard => "standard",
            Config::LtCamera => "camera",
            Config::WtPressureControl => "pressure_control",
        }
    }

    pub fn chamber(self) -> Chamber {
        match self {
            Config::LtStandard | Config::LtCamera => Chamber::LightTunnel,
            Config::WtStandard | Config::WtPressureControl => Chamber::WindTunnel,
        }
    }

    pub fn from_parts(chamber: Chamber, short: &str) -> Result<Config, VariableError> {
        Config::ALL
            .into_iter()
            .find(|c| c.chamber() == chamber && c.short_name() == short)
            .ok_or_else(|| VariableError::UnknownConfig(format!("{},{short}", chamber.code())))
    }

    pub fn has_camera(self) -> bool {
        self == Config::LtCamera
    }

    /// Variables present in datasets of this configuration, in column order.
    pub fn variables(self) -> impl Iterator<Item = &'static ChamberVariable> {
        let camera = self.has_camera();
        self.chamber().variables().iter().filter(move |v| camera || !v.camera_only)
    }

    pub fn variable(self, id: &str) -> Result<&'static ChamberVariable, VariableError> {
        let v = self.chamber().variable(id)?;
        if v.camera_only && !self.has_camera() {
            return Err(VariableError::UnknownVariable(format!("{id} (only in lt_camera)")));
        }
        Ok(v)
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Config {
    type Err = VariableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Config::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| VariableError::UnknownConfig(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariableKind {
    Actuator,
    SensorParameter,
    Sensor,
}

impl VariableKind {
    pub fn is_manipulable(self) -> bool {
        !matches!(self, VariableKind::Sensor)
    }
}

/// Storage type of a dataset column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnType {
    Float,
    Integer,
    /// Value drawn from a finite set of numbers.
    Categorical,
    /// Relative path to an image file.
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValueRange {
    Interval { min: f64, max: f64 },
    /// `{min, min + step, ..., max}`.
    Stepped { min: f64, max: f64, step: f64 },
    Integers { min: i64, max: i64 },
    Set(&'static [f64]),
    NonNegative,
    Image,
}

impl ValueRange {
    pub fn contains(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match *self {
            ValueRange::Interval { min, max } => (min..=max).contains(&value),
            ValueRange::Stepped { min, max, step } => {
                if !(min..=max).contains(&value) {
                    return false;
                }
                let k = (value - min) / step;
                (k - k.round()).abs() < 1e-6
            }
            ValueRange::Integers { min, max } => {
                value.fract() == 0.0 && value >= min as f64 && value <= max as f64
            }
            ValueRange::Set(values) => values.contains(&value),
            ValueRange::NonNegative => value >= 0.0,
            ValueRange::Image => false,
        }
    }

    /// Smallest and largest admissible value.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            ValueRange::Interval { min, max } | ValueRange::Stepped { min, max, .. } => (min, max),
            ValueRange::Integers { min, max } => (min as f64, max as f64),
            ValueRange::Set(values) => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v))),
            ValueRange::NonNegative => (0.0, f64::INFINITY),
            ValueRange::Image => (f64::NAN, f64::NAN),
        }
    }
}

impl fmt::Display for ValueRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueRange::Interval { min, max } => write!(f, "[{min}, {max}]"),
            ValueRange::Stepped { min, max, step } => write!(f, "{min}:{max}:{step}"),
            ValueRange::Integers { min, max } => write!(f, "{min}:{max}"),
            ValueRange::Set(values) => {
                let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
                write!(f, "{{{}}}", parts.join(", "))
            }
            ValueRange::NonNegative => f.write_str(">= 0"),
            ValueRange::Image => f.write_str("RGB image"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChamberVariable {
    pub id: &'static str,
    pub symbol: &'static str,
    pub kind: VariableKind,
    pub range: ValueRange,
    pub column_type: ColumnType,
    pub chamber: Chamber,
    /// Value after power-up. Meaningless for sensors.
    pub default: f64,
    /// Only present in the camera configuration.
    pub camera_only: bool,
}

impl ChamberVariable {
    pub fn is_sensor(&self) -> bool {
        self.kind == VariableKind::Sensor
    }

    /// Check a value for a SET on this variable.
    pub fn check_settable(&self, value: f64) -> Result<(), VariableError> {
        if self.is_sensor() {
            return Err(VariableError::NotSettable(self.id.to_string()));
        }
        if !self.range.contains(value) {
            return Err(VariableError::OutOfRange {
                id: self.id.to_string(),
                value,
                range: self.range.to_string(),
            });
        }
        Ok(())
    }
}

pub const VREF_SETTINGS: &[f64] = &[1.1, 2.56, 5.0];
pub const OSR_VALUES: &[f64] = &[1.0, 2.0, 4.0, 8.0];
pub const APERTURES: &[f64] = &[
    1.8, 2.0, 2.2, 2.5, 2.8, 3.2, 3.5, 4.0, 4.5, 5.0, 5.6, 6.3, 6.4, 7.1, 8.0, 9.0, 10.0, 11.0,
    13.0, 14.0, 16.0, 18.0, 20.0, 22.0,
];
pub const ISO_VALUES: &[f64] = &[
    100.0, 125.0, 160.0, 200.0, 250.0, 320.0, 400.0, 500.0, 640.0, 800.0, 1000.0, 1250.0, 1600.0,
    2000.0, 2500.0, 3200.0, 4000.0, 5000.0, 6400.0, 8000.0, 10000.0, 12800.0, 16000.0, 20000.0,
    25600.0, 32000.0, 40000.0, 51200.0,
];
// 1/n for every n below has a finite decimal expansion, so these parse back exactly.
pub const SHUTTER_SPEEDS: &[f64] = &[
    1.0 / 200.0,
    1.0 / 250.0,
    1.0 / 320.0,
    1.0 / 400.0,
    1.0 / 500.0,
    1.0 / 640.0,
    1.0 / 800.0,
    1.0 / 1000.0,
    1.0 / 1250.0,
    1.0 / 1600.0,
    1.0 / 2000.0,
    1.0 / 2500.0,
    1.0 / 3200.0,
    1.0 / 4000.0,
];

const BYTE: ValueRange = ValueRange::Integers { min: 0, max: 255 };
const ADC: ValueRange = ValueRange::Interval { min: 0.0, max: 1023.0 };
const LIGHT_COUNTS: ValueRange = ValueRange::Integers { min: 0, max: 65535 };

const fn var(
    chamber: Chamber,
    id: &'static str,
    symbol: &'static str,
    kind: VariableKind,
    range: ValueRange,
    column_type: ColumnType,
    default: f64,
) -> ChamberVariable {
    ChamberVariable { id, symbol, kind, range, column_type, chamber, default, camera_only: false }
}

const fn wt(
    id: &'static str,
    symbol: &'static str,
    kind: VariableKind,
    range: ValueRange,
    column_type: ColumnType,
    default: f64,
) -> ChamberVariable {
    var(Chamber::WindTunnel, id, symbol, kind, range, column_type, default)
}

const fn lt(
    id: &'static str,
    symbol: &'static str,
    kind: VariableKind,
    range: ValueRange,
    column_type: ColumnType,
    default: f64,
) -> ChamberVariable {
    var(Chamber::LightTunnel, id, symbol, kind, range, column_type, default)
}

const fn camera(
    id: &'static str,
    symbol: &'static str,
    kind: VariableKind,
    range: ValueRange,
    column_type: ColumnType,
    default: f64,
) -> ChamberVariable {
    let mut v = lt(id, symbol, kind, range, column_type, default);
    v.camera_only = true;
    v
}

use ColumnType as C;
use VariableKind::{Actuator as A, Sensor as S, SensorParameter as P};

const LOAD: ValueRange = ValueRange::Interval { min: 0.0, max: 1.0 };
const VREF: ValueRange = ValueRange::Set(VREF_SETTINGS);
const OSR: ValueRange = ValueRange::Set(OSR_VALUES);

pub static WIND_TUNNEL: &[ChamberVariable] = &[
    wt("load_in", "L_in", A, LOAD, C::Float, 0.0),
    wt("load_out", "L_out", A, LOAD, C::Float, 0.0),
    wt("current_in", "C̃_in", S, ADC, C::Float, 0.0),
    wt("current_out", "C̃_out", S, ADC, C::Float, 0.0),
    wt("rpm_in", "ω̃_in", S, ValueRange::NonNegative, C::Float, 0.0),
    wt("rpm_out", "ω̃_out", S, ValueRange::NonNegative, C::Float, 0.0),
    wt("res_in", "T_in", P, ValueRange::Integers { min: 0, max: 1 }, C::Integer, 1.0),
    wt("res_out", "T_out", P, ValueRange::Integers { min: 0, max: 1 }, C::Integer, 1.0),
    wt("pressure_upwind", "P̃_up", S, ValueRange::NonNegative, C::Float, 0.0),
    wt("pressure_downwind", "P̃_dw", S, ValueRange::NonNegative, C::Float, 0.0),
    wt("pressure_ambient", "P̃_amb", S, ValueRange::NonNegative, C::Float, 0.0),
    wt("pressure_intake", "P̃_int", S, ValueRange::NonNegative, C::Float, 0.0),
    wt("pot_1", "A_1", A, BYTE, C::Integer, 0.0),
    wt("pot_2", "A_2", A, BYTE, C::Integer, 0.0),
    wt("signal_1", "S̃_1", S, ADC, C::Float, 0.0),
    wt("signal_2", "S̃_2", S, ADC, C::Float, 0.0),
    wt("hatch", "H", A, ValueRange::Stepped { min: 0.0, max: 45.0, step: 0.1 }, C::Float, 0.0),
    wt("mic", "M̃", S, ADC, C::Float, 0.0),
    wt("v_in", "R_in", P, VREF, C::Categorical, 5.0),
    wt("v_out", "R_out", P, VREF, C::Categorical, 5.0),
    wt("v_1", "R_1", P, VREF, C::Categorical, 5.0),
    wt("v_2", "R_2", P, VREF, C::Categorical, 5.0),
    wt("v_mic", "R_M", P, VREF, C::Categorical, 5.0),
    wt("osr_in", "O_in", P, OSR, C::Categorical, 1.0),
    wt("osr_out", "O_out", P, OSR, C::Categorical, 1.0),
    wt("osr_1", "O_1", P, OSR, C::Categorical, 1.0),
    wt("osr_2", "O_2", P, OSR, C::Categorical, 1.0),
    wt("osr_mic", "O_M", P, OSR, C::Categorical, 1.0),
    wt("osr_upwind", "O_up", P, OSR, C::Categorical, 1.0),
    wt("osr_downwind", "O_dw", P, OSR, C::Categorical, 1.0),
    wt("osr_ambient", "O_amb", P, OSR, C::Categorical, 1.0),
    wt("osr_intake", "O_int", P, OSR, C::Categorical, 1.0),
];

pub static LIGHT_TUNNEL: &[ChamberVariable] = &[
    lt("red", "R", A, BYTE, C::Integer, 0.0),
    lt("green", "G", A, BYTE, C::Integer, 0.0),
    lt("blue", "B", A, BYTE, C::Integer, 0.0),
    lt("current", "C̃", S, ADC, C::Float, 0.0),
    lt("ir_1", "Ĩ_1", S, LIGHT_COUNTS, C::Integer, 0.0),
    lt("ir_2", "Ĩ_2", S, LIGHT_COUNTS, C::Integer, 0.0),
    lt("ir_3", "Ĩ_3", S, LIGHT_COUNTS, C::Integer, 0.0),
    lt("vis_1", "Ṽ_1", S, LIGHT_COUNTS, C::Integer, 0.0),
    lt("vis_2", "Ṽ_2", S, LIGHT_COUNTS, C::Integer, 0.0),
    lt("vis_3", "Ṽ_3", S, LIGHT_COUNTS, C::Integer, 0.0),
    lt("diode_ir_1", "D^I_1", P, ValueRange::Integers { min: 0, max: 2 }, C::Integer, 2.0),
    lt("diode_ir_2", "D^I_2", P, ValueRange::Integers { min: 0, max: 2 }, C::Integer, 2.0),
    lt("diode_ir_3", "D^I_3", P, ValueRange::Integers { min: 0, max: 2 }, C::Integer, 2.0),
    lt("diode_vis_1", "D^V_1", P, ValueRange::Integers { min: 0, max: 1 }, C::Integer, 1.0),
    lt("diode_vis_2", "D^V_2", P, ValueRange::Integers { min: 0, max: 1 }, C::Integer, 1.0),
    lt("diode_vis_3", "D^V_3", P, ValueRange::Integers { min: 0, max: 1 }, C::Integer, 1.0),
    lt("t_ir_1", "T^I_1", P, ValueRange::Integers { min: 0, max: 3 }, C::Integer, 3.0),
    lt("t_ir_2", "T^I_2", P, ValueRange::Integers { min: 0, max: 3 }, C::Integer, 3.0),
    lt("t_ir_3", "T^I_3", P, ValueRange::Integers { min: 0, max: 3 }, C::Integer, 3.0),
    lt("t_vis_1", "T^V_1", P, ValueRange::Integers { min: 0, max: 3 }, C::Integer, 3.0),
    lt("t_vis_2", "T^V_2", P, ValueRange::Integers { min: 0, max: 3 }, C::Integer, 3.0),
    lt("t_vis_3", "T^V_3", P, ValueRange::Integers { min: 0, max: 3 }, C::Integer, 3.0),
    lt("l_11", "L_11", A, BYTE, C::Integer, 0.0),
    lt("l_12", "L_12", A, BYTE, C::Integer, 0.0),
    lt("l_21", "L_21", A, BYTE, C::Integer, 0.0),
    lt("l_22", "L_22", A, BYTE, C::Integer, 0.0),
    lt("l_31", "L_31", A, BYTE, C::Integer, 0.0),
    lt("l_32", "L_32", A, BYTE, C::Integer, 0.0),
    lt("pol_1", "θ_1", A, ValueRange::Stepped { min: -180.0, max: 180.0, step: 0.1 }, C::Float, 0.0),
    lt("pol_2", "θ_2", A, ValueRange::Stepped { min: -180.0, max: 180.0, step: 0.1 }, C::Float, 0.0),
    lt("angle_1", "θ̃_1", S, ADC, C::Float, 0.0),
    lt("angle_2", "θ̃_2", S, ADC, C::Float, 0.0),
    lt("v_c", "R_C", P, VREF, C::Categorical, 5.0),
    lt("v_angle_1", "R_1", P, VREF, C::Categorical, 5.0),
    lt("v_angle_2", "R_2", P, VREF, C::Categorical, 5.0),
    lt("osr_c", "O_C", P, OSR, C::Categorical, 1.0),
    lt("osr_angle_1", "O_1", P, OSR, C::Categorical, 1.0),
    lt("osr_angle_2", "O_2", P, OSR, C::Categorical, 1.0),
    camera("im", "Ĩm", S, ValueRange::Image, C::Image, 0.0),
    camera("aperture", "Ap", P, ValueRange::Set(APERTURES), C::Categorical, 5.6),
    camera("iso", "ISO", P, ValueRange::Set(ISO_VALUES), C::Categorical, 500.0),
    camera("shutter_speed", "T_Im", P, ValueRange::Set(SHUTTER_SPEEDS), C::Categorical, 1.0 / 1000.0),
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn ids_are_unique_per_chamber() {
        for chamber in [Chamber::LightTunnel, Chamber::WindTunnel] {
            let ids: HashSet<_> = chamber.variables().iter().map(|v| v.id).collect();
            assert_eq!(ids.len(), chamber.variables().len());
        }
    }

    #[test]
    fn table_sizes() {
        assert_eq!(WIND_TUNNEL.len(), 32);
        assert_eq!(LIGHT_TUNNEL.len(), 42);
        assert_eq!(Config::LtStandard.variables().count(), 38);
        assert_eq!(Config::LtCamera.variables().count(), 42);
    }

    #[test]
    fn defaults_are_in_range() {
        for v in WIND_TUNNEL.iter().chain(LIGHT_TUNNEL) {
            if v.kind.is_manipulable() {
                assert!(v.range.contains(v.default), "{} default {}", v.id, v.default);
            }
        }
    }

    #[test]
    fn ranges() {
        let hatch = Chamber::WindTunnel.variable("hatch").unwrap();
        assert!(hatch.range.contains(22.5));
        assert!(hatch.range.contains(0.3));
        assert!(!hatch.range.contains(0.25));
        assert!(!hatch.range.contains(45.1));
        let osr = Chamber::WindTunnel.variable("osr_in").unwrap();
        assert!(osr.range.contains(8.0));
        assert!(!osr.range.contains(3.0));
        let shutter = Chamber::LightTunnel.variable("shutter_speed").unwrap();
        assert!(shutter.range.contains("0.003125".parse().unwrap()));
        assert!(!Chamber::LightTunnel.variable("red").unwrap().range.contains(12.5));
    }

    #[test]
    fn sensors_are_not_settable() {
        let rpm = Chamber::WindTunnel.variable("rpm_in").unwrap();
        assert_eq!(
            rpm.check_settable(100.0).unwrap_err().to_string(),
            "cannot SET sensor variable rpm_in"
        );
    }

    #[test]
    fn lookup_reports_wrong_chamber() {
        assert!(matches!(
            Chamber::WindTunnel.variable("red"),
            Err(VariableError::WrongChamber { .. })
        ));
        assert!(Config::LtStandard.variable("iso").is_err());
        assert!(Config::LtCamera.variable("iso").is_ok());
    }

    #[test]
    fn config_parsing() {
        assert_eq!("wt_pressure_control".parse::<Config>().unwrap(), Config::WtPressureControl);
        assert_eq!(Config::from_parts(Chamber::LightTunnel, "camera").unwrap(), Config::LtCamera);
        assert!(Config::from_parts(Chamber::LightTunnel, "pressure_control").is_err());
        assert!("lt_bogus".parse::<Config>().is_err());
    }
}
