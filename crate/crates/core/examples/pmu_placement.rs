//! Minimum PMU placement with and without existing legacy measurements.

use gridstate::io::load_network;
use gridstate::measurement::{generate_from_solution, MeasurementTemplate, Solution};
use gridstate::observability::{place_pmus, PlacementOptions};
use gridstate::powerflow::{NewtonRaphson, Start};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in ["case14.m", "case30.m", "case118.m"] {
        let sys = load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases").join(name))?;
        let alone = place_pmus(&sys, &PlacementOptions::default())?;
        println!("{name}: {} PMUs at {:?} ({} nodes)", alone.buses.len(), alone.buses, alone.nodes);
        if sys.num_buses() > 60 {
            // The legacy-aware search grows quickly with the number of readings.
            continue;
        }

        let state = NewtonRaphson::default().solve(&sys, Start::Flat)?.state();
        let legacy = generate_from_solution(&sys, Solution::Ac(&state), &MeasurementTemplate::dc(), 7)?;
        let with = place_pmus(
            &sys,
            &PlacementOptions {
                legacy: Some(&legacy),
                ..Default::default()
            },
        )?;
        println!("{name} with {} legacy readings: {} PMUs at {:?}", legacy.len(), with.buses.len(), with.buses);
    }
    Ok(())
}
