//! Recover the Malus-law coefficients from simulated sensor data by least
//! squares on `cos^2` of the polarizer angle difference.

use chamber_twin::engine::{Engine, Fidelity};
use chamber_twin::models::cos2_deg;
use chamber_twin::params::Params;
use chamber_twin::stats::linear_fit;
use chamber_twin::variables::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut engine = Engine::new(Config::LtStandard, Params::default(), Fidelity::SteadyState, 3)?;
    engine.intervene(&[("red", 255.0), ("green", 255.0), ("blue", 255.0)])?;
    let ir3 = engine.columns().position(|v| v.id == "ir_3").unwrap();

    let (mut x, mut y) = (Vec::new(), Vec::new());
    for step in 0..=36 {
        let theta = step as f64 * 5.0 - 90.0;
        engine.set("pol_2", theta)?;
        for row in engine.measure_many(5, 10.0)? {
            x.push(cos2_deg(0.0, theta));
            y.push(row.values[ir3]);
        }
    }
    let fit = linear_fit(&x, &y)?;
    println!("ir_3 = {:.2} cos^2 + {:.2}   (R^2 = {:.4})", fit.slope, fit.intercept, fit.r2);
    Ok(())
}
