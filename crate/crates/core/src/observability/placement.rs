use super::{measured_flows, measured_injections, ObservabilityError};
use crate::functions::Side;
use crate::lp::{solve_binary_ilp, IlpOptions, IlpOutcome, LinearProgram, Sense};
use crate::measurement::MeasurementSet;
use crate::network::{BusId, PowerSystem};
use serde::Serialize;

#[derive(Debug, Clone, Default)]
pub struct PlacementOptions<'a> {
    /// Legacy flow and injection measurements to account for.
    pub legacy: Option<&'a MeasurementSet>,
    pub ilp: IlpOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PmuPlacement {
    /// Bus ids with a PMU, ascending.
    pub buses: Vec<BusId>,
    /// Branch-and-bound nodes explored.
    pub nodes: usize,
    /// Coverage constraints of the integer program.
    pub constraints: usize,
}

/// Minimum number of PMUs (one per chosen bus, observing its voltage and all
/// incident branch currents) that makes the network observable.
///
/// Without legacy measurements every bus must be covered by a PMU at itself
/// or a neighbour. With legacy measurements, each active flow measured at
/// bus `i` on branch `(i, j)` requires coverage of at least one of `i, j`;
/// each active injection at `i` requires the coverage counts over `i` and
/// its neighbours to reach the neighbour count; buses touched by no legacy
/// measurement still need to be covered themselves.
pub fn place_pmus(sys: &PowerSystem, options: &PlacementOptions<'_>) -> Result<PmuPlacement, ObservabilityError> {
    let n = sys.num_buses();
    let adjacency = sys.adjacency();
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        lp.add_binary(1.0);
    }
    // Coverage of bus i: Σ_k a_ik d_k over i itself and its neighbours.
    let coverage = |buses: &[usize]| -> Vec<(usize, f64)> {
        let mut count = vec![0.0; n];
        for &i in buses {
            count[i] += 1.0;
            for &k in &adjacency[i] {
                count[k] += 1.0;
            }
        }
        count.into_iter().enumerate().filter(|&(_, c)| c != 0.0).collect()
    };

    let mut touched = vec![false; n];
    if let Some(set) = options.legacy {
        for (k, side) in measured_flows(sys, set) {
            let (f, t) = sys.branch_ends(k);
            let (i, j) = if side == Side::From { (f, t) } else { (t, f) };
            touched[i] = true;
            touched[j] = true;
            lp.add_constraint(coverage(&[i, j]), Sense::Ge, 1.0);
        }
        for i in measured_injections(sys, set) {
            touched[i] = true;
            let mut group = vec![i];
            for &k in &adjacency[i] {
                touched[k] = true;
                group.push(k);
            }
            lp.add_constraint(coverage(&group), Sense::Ge, adjacency[i].len() as f64);
        }
    }
    for i in (0..n).filter(|&i| !touched[i]) {
        lp.add_constraint(coverage(&[i]), Sense::Ge, 1.0);
    }
    let constraints = lp.num_constraints();
    match solve_binary_ilp(&lp, &options.ilp)? {
        IlpOutcome::Optimal { solution, nodes } => {
            let mut buses: Vec<BusId> = (0..n)
                .filter(|&i| solution.x[i] > 0.5)
                .map(|i| sys.buses()[i].id)
                .collect();
            buses.sort_unstable();
            Ok(PmuPlacement {
                buses,
                nodes,
                constraints,
            })
        }
        // A PMU at every bus satisfies every row, so this needs a broken LP.
        IlpOutcome::Infeasible => Err(ObservabilityError::Unrestorable {
            selected: Vec::new(),
            groups: vec![sys.buses().iter().map(|b| b.id).collect()],
        }),
    }
}
