//! Generates a seeded measurement set from a power flow solution and writes
//! it as CSV.
//!
//! `cargo run --example measurements [seed] > meas.csv`

use gridstate::io::{load_network, measurements_to_csv};
use gridstate::measurement::{generate_from_solution, MeasurementTemplate, Solution};
use gridstate::powerflow::{NewtonRaphson, Start};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let sys = load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case14.m"))?;
    let state = NewtonRaphson::default().solve(&sys, Start::Flat)?.state();
    let template = MeasurementTemplate {
        pmu_buses: vec![2, 6, 9],
        ..Default::default()
    };
    let set = generate_from_solution(&sys, Solution::Ac(&state), &template, seed)?;
    eprintln!("{} measurements (seed {seed})", set.len());
    print!("{}", measurements_to_csv(&set));
    Ok(())
}
