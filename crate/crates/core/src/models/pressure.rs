//! Static pressure inside the wind tunnel and the pitot relation between
//! the up- and downwind barometers.

use super::{check_range, ModelError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureParams {
    /// Maximum static pressure of one fan, Pa.
    pub s_max: f64,
    /// Maximum airflow of one fan, m^3/s.
    pub q_max: f64,
    /// Maximum-airflow ratio with the hatch closed.
    pub r0: f64,
    /// Increase of the airflow ratio from closed to fully open hatch.
    pub beta: f64,
    /// Ambient pressure, Pa.
    pub p_amb: f64,
}

impl Default for PressureParams {
    fn default() -> Self {
        PressureParams { s_max: 74.82, q_max: 0.052, r0: 0.7, beta: 0.15, p_amb: 101_325.0 }
    }
}

impl PressureParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.s_max > 0.0 && self.q_max > 0.0) {
            return Err(ModelError::InvalidParams("s_max and q_max must be > 0".into()));
        }
        if !(self.r0 > 0.0 && self.r0 <= 1.0) {
            return Err(ModelError::InvalidParams("r0 must lie in (0, 1]".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(ModelError::InvalidParams("beta must be >= 0".into()));
        }
        Ok(())
    }

    /// Airflow ratio for a hatch position in degrees.
    pub fn ratio_for_hatch(&self, hatch: f64) -> f64 {
        (self.r0 + self.beta * hatch / 45.0).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliParams {
    /// Air density, kg/m^3.
    pub rho: f64,
    /// Fan opening area, m^2.
    pub area: f64,
    /// Offset between the two barometers, Pa.
    pub delta: f64,
    pub q_max: f64,
    pub omega_max: f64,
}

impl Default for BernoulliParams {
    fn default() -> Self {
        BernoulliParams {
            rho: 1.2,
            area: std::f64::consts::PI * 0.06 * 0.06,
            delta: 7.1,
            q_max: 0.052,
            omega_max: 314.16,
        }
    }
}

fn check_speed(name: &'static str, omega: f64, omega_max: f64) -> Result<(), ModelError> {
    check_range(name, omega, 0.0, omega_max)
}

/// Downwind pressure from the affinity laws alone (no impedance).
pub fn downwind_pressure_affinity(
    omega_in: f64,
    omega_out: f64,
    omega_max: f64,
    p: &PressureParams,
) -> Result<f64, ModelError> {
    check_speed("omega_in", omega_in, omega_max)?;
    check_speed("omega_out", omega_out, omega_max)?;
    let x_in = omega_in / omega_max;
    let x_out = omega_out / omega_max;
    Ok(p.p_amb + p.s_max * x_in * x_in - p.s_max * x_out * x_out)
}

/// Static pressure produced by one fan at speed `omega` in a system whose
/// impedance lets the fan reach a fraction `r` of its maximum airflow.
///
/// The operating point is where the impedance curve `S = Z Q^2` meets the
/// linear PQ-curve `S = x^2 S_max - x (S_max / Q_max) Q`, `x = omega / omega_max`.
pub fn static_pressure(
    omega: f64,
    r: f64,
    omega_max: f64,
    p: &PressureParams,
) -> Result<f64, ModelError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(ModelError::OutOfRange { name: "r", value: r, range: "(0, 1]".into() });
    }
    check_speed("omega", omega, omega_max)?;
    let z = p.s_max / (p.q_max * p.q_max) * (1.0 - r) / (r * r);
    if z == 0.0 {
        return Ok(0.0);
    }
    let x = omega / omega_max;
    // z Q^2 + b Q + c = 0 with b >= 0, c <= 0: one nonnegative root.
    let b = x * p.s_max / p.q_max;
    let c = -x * x * p.s_max;
    let disc = (b * b - 4.0 * z * c).max(0.0);
    let q = if c == 0.0 { 0.0 } else { 2.0 * c / (-b - disc.sqrt()) };
    Ok(z * q * q)
}

/// Downwind pressure with a fixed impedance ratio `r`.
pub fn downwind_pressure_impedance(
    omega_in: f64,
    omega_out: f64,
    r: f64,
    omega_max: f64,
    p: &PressureParams,
) -> Result<f64, ModelError> {
    Ok(p.p_amb + static_pressure(omega_in, r, omega_max, p)?
        - static_pressure(omega_out, r, omega_max, p)?)
}

/// Downwind pressure where the hatch position (degrees) lowers the impedance.
pub fn downwind_pressure_hatch(
    omega_in: f64,
    omega_out: f64,
    hatch: f64,
    omega_max: f64,
    p: &PressureParams,
) -> Result<f64, ModelError> {
    check_range("hatch", hatch, 0.0, 45.0)?;
    downwind_pressure_impedance(omega_in, omega_out, p.ratio_for_hatch(hatch), omega_max, p)
}

/// Up- minus downwind barometer reading as a function of the intake speed.
pub fn pitot_difference(omega_in: f64, p: &BernoulliParams) -> Result<f64, ModelError> {
    check_range("omega_in", omega_in, 0.0, f64::INFINITY)?;
    let k = p.q_max / p.omega_max;
    Ok(p.rho / (2.0 * p.area * p.area) * k * k * omega_in * omega_in + p.delta)
}
