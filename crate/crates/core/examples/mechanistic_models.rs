//! Evaluate the mechanistic models directly, without the engine.

use chamber_twin::models::fan::{drawn_current, steady_speed, FanParams};
use chamber_twin::models::light::{malus_intensity, MalusParams};
use chamber_twin::models::pressure::{downwind_pressure_affinity, PressureParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fan = FanParams::default();
    println!("load  omega[rad/s]  current[A]");
    for load in [0.0, 0.25, 0.5, 0.75, 1.0] {
        println!("{load:4.2}  {:12.2}  {:10.4}", steady_speed(load, &fan)?, drawn_current(load, &fan)?);
    }

    let pressure = PressureParams::default();
    let w = steady_speed(0.8, &fan)?;
    let v = steady_speed(0.4, &fan)?;
    println!("downwind pressure at loads (0.8, 0.4): {:.2} Pa", downwind_pressure_affinity(w, v, fan.omega_max, &pressure)?);

    let malus = MalusParams::default();
    let (slope, intercept) = malus.betas();
    println!("malus: I = {slope:.4} cos^2 + {intercept:.4}");
    for theta in [0.0, 30.0, 45.0, 60.0, 90.0] {
        println!("  {theta:5.1} deg -> {:.4}", malus_intensity(0.0, theta, &malus));
    }
    Ok(())
}
