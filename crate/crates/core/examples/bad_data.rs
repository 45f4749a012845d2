//! Injects a gross error into a 14-bus measurement set and removes it with
//! the largest normalized residual test.

use gridstate::baddata::{run_bad_data, BadDataOptions};
use gridstate::estimation::{EstimationOptions, ModelKind, StateEstimator};
use gridstate::io::load_network;
use gridstate::measurement::{generate_from_solution, MeasurementKind, MeasurementTemplate, MeasurementUpdate, Solution};
use gridstate::powerflow::{NewtonRaphson, Start};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case14.m"))?;
    let state = NewtonRaphson::default().solve(&sys, Start::Flat)?.state();
    let template = MeasurementTemplate {
        inclusion_probability: 1.0,
        ..Default::default()
    };
    let mut set = generate_from_solution(&sys, Solution::Ac(&state), &template, 5)?;

    let target = set.measurements().iter().position(|m| m.kind == MeasurementKind::Pflow && m.element == 4).unwrap();
    let m = set.measurements()[target].clone();
    set.update(&m.id, &MeasurementUpdate { value: Some(m.value + 20.0 * m.variance.sqrt()), ..Default::default() })?;
    println!("corrupted {} ({} on branch {}) by 20 sigma", m.id, m.kind, m.element);

    let mut est = StateEstimator::new(ModelKind::Ac, EstimationOptions::default());
    let r = run_bad_data(&sys, &mut set, &mut est, &BadDataOptions::default())?;
    println!(
        "initial chi-squared {:.1} vs threshold {:.1}: {}",
        r.initial.statistic,
        r.initial.threshold,
        if r.initial.passed { "pass" } else { "fail" }
    );
    for removal in &r.removals {
        println!("pass {}: removed {:?} (normalized residual {:.1})", removal.pass, removal.ids, removal.normalized_residual);
    }
    println!("final chi-squared {:.1} ({:?})", r.final_test.statistic, r.verdict);
    Ok(())
}
