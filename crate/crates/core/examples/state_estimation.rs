//! AC, PMU and DC state estimation with each solution method.

use gridstate::estimation::{EstimationOptions, Method, ModelKind, StateEstimator};
use gridstate::io::load_network;
use gridstate::measurement::{generate_from_solution, MeasurementTemplate, Solution};
use gridstate::powerflow::{DcPowerFlow, NewtonRaphson, Start};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case14.m"))?;
    let truth = NewtonRaphson::default().solve(&sys, Start::Flat)?.state();
    let dc_truth = DcPowerFlow::new().solve(&sys)?.angle;

    let ac = generate_from_solution(&sys, Solution::Ac(&truth), &MeasurementTemplate { pmu_buses: vec![2], ..Default::default() }, 1)?;
    let pmu = generate_from_solution(&sys, Solution::Ac(&truth), &MeasurementTemplate::pmu_only(vec![2, 6, 7, 9]), 1)?;
    let dc = generate_from_solution(&sys, Solution::Dc(&dc_truth), &MeasurementTemplate::dc(), 1)?;

    for (kind, set) in [(ModelKind::Ac, &ac), (ModelKind::Pmu, &pmu), (ModelKind::Dc, &dc)] {
        for method in [Method::Wls, Method::Orthogonal, Method::PetersWilkinson, Method::Lav] {
            let r = StateEstimator::new(kind, EstimationOptions::with_method(method)).solve(&sys, set)?;
            let reference = if kind == ModelKind::Dc { &dc_truth } else { &truth.angle };
            let err = r.angle.iter().zip(reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            println!(
                "{:<4} {:<16} {:>3} rows {:>3} states {:>2} iterations  max angle error {err:.2e} rad",
                format!("{kind:?}"),
                format!("{method:?}"),
                r.rows,
                r.states,
                r.iterations
            );
        }
    }
    Ok(())
}
