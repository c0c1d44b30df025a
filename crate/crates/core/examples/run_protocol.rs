//! Run a small light-tunnel protocol and write it out as a dataset.
//!
//! cargo run --example run_protocol -- /tmp/out

use chamber_twin::dataset::{read_experiment, write_experiment, Schema};
use chamber_twin::engine::{run_protocol, Fidelity};
use chamber_twin::params::Params;
use chamber_twin::protocol::Protocol;
use chamber_twin::variables::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(Into::into).unwrap_or_else(std::env::temp_dir);

    let protocol = Protocol::new(Config::LtStandard)
        .set("red", 200.0)
        .set("pol_1", 0.0)
        .msr(5, 10.0)
        .set("pol_2", 60.0)
        .wait(500)
        .msr(5, 10.0);
    print!("{protocol}");

    let rows = run_protocol(&protocol, Params::default(), Fidelity::SteadyState, Some(7))?;
    let manifest = write_experiment(rows, &Schema::for_config(protocol.config), &out, "malus_demo")?;
    println!("{manifest:?}");

    let table = read_experiment(&out, "malus_demo")?;
    for (t, ir) in table.floats("timestamp").unwrap().iter().zip(table.floats("ir_3").unwrap()) {
        println!("{t:8.3}  ir_3 = {ir:.2}");
    }
    Ok(())
}
