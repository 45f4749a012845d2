//! Finds observable islands for a sparse measurement set and restores
//! observability with pseudo-measurements.

use gridstate::functions::Side;
use gridstate::io::load_network;
use gridstate::measurement::{Measurement, MeasurementKind, MeasurementSet};
use gridstate::observability::{
    find_flow_islands, find_maximal_islands, restore_observability, transfer_pseudo_measurements, PseudoKind, PseudoMeasurement,
    DEFAULT_PIVOT_THRESHOLD,
};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case14.m"))?;
    let flow = |k: usize| Measurement::new(format!("p{k}"), MeasurementKind::Pflow, k, 0.0, 1e-4).with_side(Side::From);
    let injection = |bus: usize| Measurement::new(format!("i{bus}"), MeasurementKind::Pinj, bus, 0.0, 1e-4);
    let mut set = MeasurementSet::new(vec![flow(1), flow(3), flow(7), flow(10), flow(15), injection(4), injection(12)])?;

    let islands = find_flow_islands(&sys, &set);
    println!("{} flow islands", islands.len());
    let maximal = find_maximal_islands(&sys, &set);
    println!("{} maximal islands:", maximal.len());
    for island in &maximal.islands {
        println!("  {island:?}");
    }

    // Candidates: zero-valued flows on every tie branch.
    let candidates: Vec<PseudoMeasurement> = maximal
        .tie_branches
        .iter()
        .map(|&k| PseudoMeasurement {
            kind: PseudoKind::Flow { branch: k + 1 },
            value: 0.0,
            variance: 1.0,
        })
        .collect();
    let restoration = restore_observability(&sys, &maximal, &set, &candidates, DEFAULT_PIVOT_THRESHOLD)?;
    let ids = transfer_pseudo_measurements(&mut set, &candidates, &restoration.selected)?;
    println!("added {} pseudo-measurements: {ids:?}", ids.len());
    println!("observable now: {}", find_maximal_islands(&sys, &set).is_observable());
    Ok(())
}
