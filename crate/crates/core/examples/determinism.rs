//! Same seed, same rows; a different seed changes the noise but not the
//! mechanics.

use chamber_twin::engine::{run_protocol, Fidelity};
use chamber_twin::params::Params;
use chamber_twin::protocol::parse_protocol;

const PROTOCOL: &str = "\
CHAMBER,wt,standard
SEED,11
SET,load_in,0.7
SET,load_out,0.2
WAIT,2000
MSR,20,5
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let protocol = parse_protocol(PROTOCOL)?;
    let run = |seed| run_protocol(&protocol, Params::default(), Fidelity::Dynamic, seed);

    let a = run(None)?;
    let b = run(None)?;
    let c = run(Some(12))?;
    println!("repeat identical: {}", a == b);
    println!("other seed identical: {}", a == c);
    println!("first row, seed 11: {:?}", &a[0].values[..6]);
    println!("first row, seed 12: {:?}", &c[0].values[..6]);
    Ok(())
}
