//! Builds a seeded synthetic network, runs DC power flow and DC state
//! estimation on it, and optionally saves it as a snapshot.
//!
//! `cargo run --release --example synthetic_grid -- [buses] [seed] [out.json]`

use gridstate::estimation::{EstimationOptions, ModelKind, StateEstimator};
use gridstate::io::write_snapshot;
use gridstate::measurement::{generate_from_solution, MeasurementTemplate, Solution};
use gridstate::powerflow::DcPowerFlow;
use gridstate::synthetic::{synthetic_network, SyntheticOptions};
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let options = SyntheticOptions {
        buses: args.first().map(|s| s.parse()).transpose()?.unwrap_or(10_000),
        seed: args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(1),
        ..Default::default()
    };

    let t = Instant::now();
    let sys = synthetic_network(&options)?;
    println!("{} buses, {} branches in {:.2?}", sys.num_buses(), sys.branches().len(), t.elapsed());

    let t = Instant::now();
    let pf = DcPowerFlow::new().solve(&sys)?;
    println!("DC power flow {:.2?}", t.elapsed());

    let template = MeasurementTemplate {
        inclusion_probability: 1.0,
        ..MeasurementTemplate::dc()
    };
    let set = generate_from_solution(&sys, Solution::Dc(&pf.angle), &template, options.seed)?;
    let t = Instant::now();
    let est = StateEstimator::new(ModelKind::Dc, EstimationOptions::default()).solve(&sys, &set)?;
    println!("DC WLS {:.2?} over {} rows", t.elapsed(), est.rows);

    if let Some(path) = args.get(2) {
        write_snapshot(path.as_ref(), &sys, Some(&set))?;
        println!("wrote {path}");
    }
    Ok(())
}
