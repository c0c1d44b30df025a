//! Fan speed and drawn current as functions of the fan load.

use super::{check_range, ModelError};
use crate::ode;

/// Drag constant as printed alongside the fan torque model.
pub const PRINTED_DRAG_K: f64 = 5.26e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DragConstant {
    /// `K = tau(1) / omega_max^2`, so the torque balance settles at
    /// `omega_max` under full load.
    SteadyState,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanParams {
    /// rad/s
    pub omega_max: f64,
    pub l_min: f64,
    /// A
    pub c_max: f64,
    /// A
    pub c_min: f64,
    /// kg m^2
    pub inertia: f64,
    /// N m / A
    pub torque_const: f64,
    pub drag: DragConstant,
}

impl Default for FanParams {
    fn default() -> Self {
        FanParams {
            omega_max: 314.16,
            l_min: 0.1,
            c_max: 0.26,
            c_min: 0.166,
            // solid disc, m = 0.02 kg, r = 0.059 m
            inertia: 3.48e-5,
            torque_const: 0.05,
            drag: DragConstant::SteadyState,
        }
    }
}

impl FanParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidParams(msg.to_string()));
        if !(self.omega_max > 0.0) {
            return bad("omega_max must be > 0");
        }
        if !(self.l_min > 0.0 && self.l_min < 1.0) {
            return bad("l_min must lie in (0, 1)");
        }
        if !(self.c_max > self.c_min && self.c_min >= 0.0) {
            return bad("need c_max > c_min >= 0");
        }
        if !(self.inertia > 0.0 && self.torque_const > 0.0) {
            return bad("inertia and torque_const must be > 0");
        }
        if !(self.drag_k() > 0.0) {
            return bad("drag constant must be > 0");
        }
        Ok(())
    }

    /// Motor torque for a load, from the current above the no-load current.
    pub fn torque(&self, load: f64) -> f64 {
        if load > 0.0 {
            self.torque_const * load.max(self.l_min).powi(3) * (self.c_max - self.c_min)
        } else {
            0.0
        }
    }

    pub fn drag_k(&self) -> f64 {
        match self.drag {
            DragConstant::SteadyState => self.torque(1.0) / (self.omega_max * self.omega_max),
            DragConstant::Fixed(k) => k,
        }
    }

    /// Equilibrium of the torque balance, `sqrt(tau(L) / K)`.
    pub fn torque_balance_speed(&self, load: f64) -> f64 {
        (self.torque(load) / self.drag_k()).sqrt()
    }
}

/// Steady-state speed (rad/s) under a load in `[0, 1]`.
pub fn steady_speed(load: f64, p: &FanParams) -> Result<f64, ModelError> {
    check_range("load", load, 0.0, 1.0)?;
    Ok(if load > 0.0 { load.max(p.l_min) * p.omega_max } else { 0.0 })
}

/// Drawn current (A) under a load in `[0, 1]`; follows the cube of speed.
pub fn drawn_current(load: f64, p: &FanParams) -> Result<f64, ModelError> {
    check_range("load", load, 0.0, 1.0)?;
    Ok(if load > 0.0 {
        p.c_min + p.l_min.max(load).powi(3) * (p.c_max - p.c_min)
    } else {
        p.c_min
    })
}

/// Right-hand side of the torque balance, `(tau(L) - K w^2) / I`.
pub fn speed_derivative(omega: f64, load: f64, p: &FanParams) -> f64 {
    (p.torque(load) - p.drag_k() * omega * omega) / p.inertia
}

/// Advance the fan speed by one RK4 step of length `dt` seconds.
pub fn speed_step(omega: f64, load: f64, dt: f64, p: &FanParams) -> Result<f64, ModelError> {
    if !omega.is_finite() {
        return Err(ModelError::NonFinite { name: "omega", value: omega });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(ModelError::OutOfRange { name: "dt", value: dt, range: "(0, inf)".into() });
    }
    check_range("omega", omega, 0.0, f64::INFINITY)?;
    check_range("load", load, 0.0, 1.0)?;
    let next = ode::rk4_step(|_, w| speed_derivative(w, load, p), 0.0, omega, dt);
    Ok(next.max(0.0))
}

/// Integrate the torque balance over `duration` seconds at step `dt`.
pub fn integrate_speed(
    omega: f64,
    load: f64,
    duration: f64,
    dt: f64,
    p: &FanParams,
) -> Result<f64, ModelError> {
    speed_step(omega, load, dt, p)?;
    Ok(ode::integrate(|_, w| speed_derivative(w, load, p), omega, duration, dt, |w| w.max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> FanParams {
        FanParams::default()
    }

    #[test]
    fn a1_values() {
        assert_eq!(steady_speed(1.0, &p()).unwrap(), 314.16);
        assert_eq!(steady_speed(0.0, &p()).unwrap(), 0.0);
        assert!((steady_speed(0.05, &p()).unwrap() - 31.416).abs() < 1e-12);
        assert!(steady_speed(1.2, &p()).is_err());
        assert!(steady_speed(-0.1, &p()).is_err());
    }

    #[test]
    fn b1_values() {
        assert_eq!(drawn_current(1.0, &p()).unwrap(), 0.26);
        assert_eq!(drawn_current(0.0, &p()).unwrap(), 0.166);
        // 0.166 + 0.5^3 * 0.094
        assert!((drawn_current(0.5, &p()).unwrap() - 0.17775).abs() < 1e-12);
        assert!(drawn_current(f64::NAN, &p()).is_err());
    }

    #[test]
    fn drag_constant_options() {
        let k = p().drag_k();
        assert!((k - 0.05 * 0.094 / (314.16f64 * 314.16)).abs() < 1e-20);
        // The printed constant disagrees with the steady-state one by ~10%.
        assert!((PRINTED_DRAG_K / k - 1.0).abs() > 0.09);
        let printed = FanParams { drag: DragConstant::Fixed(PRINTED_DRAG_K), ..p() };
        assert_eq!(printed.drag_k(), PRINTED_DRAG_K);
        printed.validate().unwrap();
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(FanParams { l_min: 1.0, ..p() }.validate().is_err());
        assert!(FanParams { c_min: 0.3, ..p() }.validate().is_err());
        assert!(FanParams { drag: DragConstant::Fixed(0.0), ..p() }.validate().is_err());
        p().validate().unwrap();
    }

    #[test]
    fn a2_fixed_point() {
        for load in [0.1, 0.3, 0.77, 1.0] {
            let w = p().torque_balance_speed(load);
            for dt in [1e-4, 1e-3, 0.5] {
                let next = speed_step(w, load, dt, &p()).unwrap();
                assert!((next / w - 1.0).abs() < 1e-12, "load {load} dt {dt}");
            }
        }
    }

    #[test]
    fn a2_unpowered_decay_is_monotone() {
        let mut w = 300.0;
        for _ in 0..20_000 {
            let next = speed_step(w, 0.0, 1e-3, &p()).unwrap();
            assert!(next <= w && next >= 0.0);
            w = next;
        }
        // w(t) = w0 / (1 + w0 K t / I)
        assert!(w < 300.0 * 0.15);
    }

    #[test]
    fn a2_matches_closed_form() {
        // From rest, w(t) = w_ss * tanh(t * sqrt(tau K) / I).
        let fan = p();
        let tau = fan.torque(1.0);
        let k = fan.drag_k();
        let w_ss = (tau / k).sqrt();
        let rate = (tau * k).sqrt() / fan.inertia;
        let w = integrate_speed(0.0, 1.0, 10.0, 1e-3, &fan).unwrap();
        assert!((w / w_ss - 1.0).abs() < 1e-3);
        let exact = w_ss * (10.0 * rate).tanh();
        assert!((w / exact - 1.0).abs() < 1e-9);
        // With the steady-state drag constant, A1 and A2 agree at full load.
        assert!((w_ss / steady_speed(1.0, &fan).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn a2_rejects_bad_inputs() {
        assert!(speed_step(10.0, 0.5, 0.0, &p()).is_err());
        assert!(speed_step(10.0, 0.5, -1e-3, &p()).is_err());
        assert!(speed_step(f64::INFINITY, 0.5, 1e-3, &p()).is_err());
        assert!(speed_step(f64::NAN, 0.5, 1e-3, &p()).is_err());
    }
}
