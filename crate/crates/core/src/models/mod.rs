//! Mechanistic models of the chamber physics.
//!
//! All functions here are pure: they evaluate a closed-form model (or advance
//! an ODE by one step) for value parameters and never touch random state.
//! Default parameter values reproduce the published fan, barometer,
//! polarizer and camera constants.

pub mod fan;
pub mod light;
pub mod pressure;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use fan::{DragConstant, FanParams};
pub use light::{ColorFidelity, ImageModelParams, MalusParams, Raster};
pub use pressure::{BernoulliParams, PressureParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: String },
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("unknown model '{0}' (expected one of A1, A2, B1, C1, C2, C3, D1, E1, F1, F2, F3)")]
    UnknownModel(String),
}

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
) -> Result<(), ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NonFinite { name, value });
    }
    if value < lo || value > hi {
        return Err(ModelError::OutOfRange { name, value, range: format!("[{lo}, {hi}]") });
    }
    Ok(())
}

/// Identifier of one of the mechanistic models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelId {
    A1,
    A2,
    B1,
    C1,
    C2,
    C3,
    D1,
    E1,
    F1,
    F2,
    F3,
}

impl ModelId {
    pub const ALL: [ModelId; 11] = [
        ModelId::A1,
        ModelId::A2,
        ModelId::B1,
        ModelId::C1,
        ModelId::C2,
        ModelId::C3,
        ModelId::D1,
        ModelId::E1,
        ModelId::F1,
        ModelId::F2,
        ModelId::F3,
    ];
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ModelId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| ModelError::UnknownModel(s.to_string()))
    }
}

/// Degrees to the squared cosine of the polarizer angle difference.
///
/// The difference is taken before the conversion so that swapping the two
/// angles gives a bit-identical result.
pub fn cos2_deg(theta1: f64, theta2: f64) -> f64 {
    let c = (theta1 - theta2).to_radians().cos();
    c * c
}
