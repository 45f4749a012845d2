//! DC optimal power flow on the 30-bus case with piecewise-linear costs.
//!
//! `cargo run --example dc_opf [segments]`

use gridstate::io::load_network;
use gridstate::opf::{linearize_costs, solve_dc_opf, DcOpfOptions};
use std::path::PathBuf;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let segments = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(8);
    let sys = load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases/case30.m"))?;
    // The case has quadratic costs; the LP needs linear pieces.
    let sys = linearize_costs(&sys, segments)?;
    let r = solve_dc_opf(&sys, &DcOpfOptions::default())?;

    println!("objective {:.2} $/h after {} simplex iterations", r.objective, r.iterations);
    for (g, p) in sys.generators().iter().zip(&r.dispatch) {
        println!("generator at bus {:>2}: {:>8.2} MW", g.bus, p * sys.base_mva());
    }
    // Duals are per unit of power; one unit is base_mva megawatts.
    let (lo, hi) = r.prices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| (a.min(p), b.max(p)));
    let base = sys.base_mva();
    println!("nodal prices between {:.3} and {:.3} $/MWh", lo / base, hi / base);
    let binding = sys
        .branches()
        .iter()
        .zip(&r.flows)
        .filter(|(b, f)| b.rating > 0.0 && (f.abs() - b.rating).abs() < 1e-6)
        .count();
    println!("{binding} binding branch limits");
    Ok(())
}
