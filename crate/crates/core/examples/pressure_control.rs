//! Closed-loop pressure control: the PID drives both fan loads towards a
//! downwind pressure target.

use chamber_twin::engine::{Engine, Fidelity};
use chamber_twin::params::Params;
use chamber_twin::validation::validation_target;
use chamber_twin::variables::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut params = Params::default();
    let target = validation_target(&params);
    params.pid.target = Some(target);
    let mut engine = Engine::new(Config::WtPressureControl, params, Fidelity::Dynamic, 1)?;
    // The gains act on an error in Pa: without oversampling, barometer noise
    // alone is enough to drive the loads to their limits.
    engine.set("osr_downwind", 8.0)?;

    println!("target {target:.2} Pa");
    let downwind = engine.columns().position(|v| v.id == "pressure_downwind").unwrap();
    for _ in 0..10 {
        let rows = engine.measure_many(20, 5.0)?;
        let row = rows.last().unwrap();
        let (load_in, load_out) = engine.last_pid_step().unwrap().loads();
        println!(
            "t = {:6.1}  measured {:.2} Pa  loads ({load_in:.3}, {load_out:.3})",
            row.timestamp, row.values[downwind]
        );
    }
    println!("true downwind pressure {:.2} Pa", engine.true_downwind_pressure()?);
    Ok(())
}
