//! Randomized-experiment validation of every ground-truth edge of a
//! configuration; prints the CSV report.
//!
//! cargo run --release --example validate_edges -- wt_standard

use chamber_twin::params::Params;
use chamber_twin::validation::{report_csv, validate_all, ValidationOptions};
use chamber_twin::variables::Config;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "wt_standard".into());
    let config = Config::ALL.into_iter().find(|c| c.id() == id).ok_or(format!("unknown config {id}"))?;

    let opts = ValidationOptions::default();
    let report = validate_all(config, &Params::default(), &opts)?;
    print!("{}", report_csv(&report));
    let rejected = report.iter().filter(|r| r.result.rejected()).count();
    eprintln!("rejected {rejected}/{}", report.len());
    Ok(())
}
