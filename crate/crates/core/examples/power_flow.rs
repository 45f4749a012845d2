//! Solves the IEEE 14-bus case with every power flow method.
//!
//! `cargo run --example power_flow [case.m]`

use gridstate::io::load_network;
use gridstate::powerflow::{DcPowerFlow, FastDecoupled, FastDecoupledVariant, GaussSeidel, NewtonRaphson, Start};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case14.m"));
    let sys = load_network(&path)?;

    let reports = [
        NewtonRaphson::default().solve(&sys, Start::Flat)?,
        FastDecoupled::new(FastDecoupledVariant::Xb).solve(&sys, Start::Flat)?,
        FastDecoupled::new(FastDecoupledVariant::Bx).solve(&sys, Start::Flat)?,
        GaussSeidel::default().solve(&sys, Start::Flat)?,
    ];
    for r in &reports {
        println!(
            "{:<18} {:>4} iterations, final mismatch {:.2e}, losses {:.4} pu",
            format!("{:?}", r.method),
            r.iterations,
            r.mismatch_trace.last().copied().unwrap_or(0.0),
            r.active_losses()
        );
    }

    let nr = &reports[0];
    println!("\nbus   |V| (pu)   angle (deg)");
    for (b, (v, a)) in sys.buses().iter().zip(nr.magnitude.iter().zip(&nr.angle)) {
        println!("{:>3}   {v:.5}   {:>9.4}", b.id, a.to_degrees());
    }

    let dc = DcPowerFlow::new().solve(&sys)?;
    println!("\nDC approximation: slack injection {:.4} pu", dc.slack_injection);
    Ok(())
}
