//! Observability of the decoupled active-power model: observable islands,
//! restoration with pseudo-measurements and optimal PMU placement.
//!
//! The decoupled model uses unit coefficients: an active flow on branch
//! `(f, t)` is the row `e_f − e_t`, an active injection at bus `i` is
//! `deg(i)·e_i − Σ_{j∈N(i)} e_j`, and a voltage angle is `e_i`.

mod dense;
mod islands;
mod placement;
mod restoration;

pub use dense::{null_space, rank};
pub use islands::{find_flow_islands, find_maximal_islands, IslandKind, IslandPartition};
pub use placement::{place_pmus, PlacementOptions, PmuPlacement};
pub use restoration::{
    restore_observability, transfer_pseudo_measurements, PseudoKind, PseudoMeasurement, Restoration,
    DEFAULT_PIVOT_THRESHOLD,
};

use crate::functions::Side;
use crate::lp::LpError;
use crate::measurement::{MeasurementKind, MeasurementSet};
use crate::network::{BusId, NetworkError, PowerSystem};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservabilityError {
    #[error("pseudo-measurement {0} is not a tie flow, tie injection or bus angle")]
    InvalidPseudo(usize),
    #[error("pseudo-measurement {index} references missing element {element}")]
    UnknownElement { index: usize, element: usize },
    #[error("pseudo-measurements cannot restore observability; unobservable groups remain: {groups:?}")]
    Unrestorable { selected: Vec<usize>, groups: Vec<Vec<BusId>> },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// One decoupled row: bus positions and coefficients.
pub type DecoupledRow = Vec<(usize, f64)>;

pub(crate) fn flow_row(sys: &PowerSystem, k: usize) -> DecoupledRow {
    let (f, t) = sys.branch_ends(k);
    vec![(f, 1.0), (t, -1.0)]
}

pub(crate) fn injection_row(adjacency: &[Vec<usize>], i: usize) -> DecoupledRow {
    let mut row = vec![(i, adjacency[i].len() as f64)];
    row.extend(adjacency[i].iter().map(|&j| (j, -1.0)));
    row
}

/// Decoupled rows of the in-service active measurements (flows, injections
/// and, when asked, voltage angles), each tagged with its measurement
/// position.
pub fn decoupled_rows(sys: &PowerSystem, set: &MeasurementSet, with_angles: bool) -> Vec<(usize, DecoupledRow)> {
    let adjacency = sys.adjacency();
    let mut out = Vec::new();
    for (p, m) in set.measurements().iter().enumerate() {
        if !m.in_service {
            continue;
        }
        match m.kind {
            MeasurementKind::Pflow => {
                let k = m.element - 1;
                if k < sys.branches().len() && sys.branches()[k].in_service {
                    out.push((p, flow_row(sys, k)));
                }
            }
            MeasurementKind::Pinj => {
                if let Some(i) = sys.bus_index(m.element) {
                    out.push((p, injection_row(&adjacency, i)));
                }
            }
            MeasurementKind::VphasorAng if with_angles => {
                if let Some(i) = sys.bus_index(m.element) {
                    out.push((p, vec![(i, 1.0)]));
                }
            }
            _ => {}
        }
    }
    out
}

/// Branch (0-based) and measured side of every in-service active flow.
pub(crate) fn measured_flows(sys: &PowerSystem, set: &MeasurementSet) -> Vec<(usize, Side)> {
    set.measurements()
        .iter()
        .filter(|m| m.in_service && m.kind == MeasurementKind::Pflow)
        .filter_map(|m| {
            let k = m.element.checked_sub(1)?;
            (k < sys.branches().len() && sys.branches()[k].in_service).then(|| (k, m.side.unwrap_or(Side::From)))
        })
        .collect()
}

/// Bus positions of every in-service active injection.
pub(crate) fn measured_injections(sys: &PowerSystem, set: &MeasurementSet) -> Vec<usize> {
    set.measurements()
        .iter()
        .filter(|m| m.in_service && m.kind == MeasurementKind::Pinj)
        .filter_map(|m| sys.bus_index(m.element))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::Side;
    use crate::measurement::Measurement;
    use crate::network::{Branch, Bus, BusKind};

    pub(crate) fn network(n: usize, edges: &[(usize, usize)]) -> PowerSystem {
        let buses = (1..=n)
            .map(|i| Bus::new(i, if i == 1 { BusKind::Slack } else { BusKind::Pq }))
            .collect();
        let branches = edges.iter().map(|&(f, t)| Branch::line(f, t, 0.01, 0.1)).collect();
        PowerSystem::new(100.0, buses, branches, Vec::new()).unwrap()
    }

    fn flow(id: &str, branch: usize) -> Measurement {
        Measurement::new(id, MeasurementKind::Pflow, branch, 0.0, 1e-4).with_side(Side::From)
    }

    fn inj(id: &str, bus: usize) -> Measurement {
        Measurement::new(id, MeasurementKind::Pinj, bus, 0.0, 1e-4)
    }

    #[test]
    fn flow_on_one_branch_of_a_path() {
        let sys = network(3, &[(1, 2), (2, 3)]);
        let set = MeasurementSet::new(vec![flow("a", 1)]).unwrap();
        let p = find_flow_islands(&sys, &set);
        assert_eq!(p.islands, vec![vec![1, 2], vec![3]]);
        assert_eq!(p.tie_branches, vec![1]);
        assert_eq!(p.tie_buses, vec![2, 3]);
        assert!(!p.is_observable());
    }

    #[test]
    fn tie_injection_merges_two_islands() {
        let sys = network(3, &[(1, 2), (2, 3)]);
        let set = MeasurementSet::new(vec![flow("a", 1), inj("b", 3)]).unwrap();
        assert!(find_flow_islands(&sys, &set).is_observable());
    }

    #[test]
    fn injections_spanning_three_islands_need_the_null_space() {
        // Star around bus 2 plus a chord 3-4: injections at 2 and 4 join
        // three singleton islands together, which pairwise tie rules miss.
        let sys = network(4, &[(1, 2), (2, 3), (2, 4), (3, 4)]);
        let set = MeasurementSet::new(vec![flow("a", 1), inj("b", 2), inj("c", 4)]).unwrap();
        let flow_islands = find_flow_islands(&sys, &set);
        assert_eq!(flow_islands.len(), 3);
        let maximal = find_maximal_islands(&sys, &set);
        assert!(maximal.is_observable(), "{:?}", maximal.islands);
    }

    #[test]
    fn no_measurements_leaves_singletons() {
        let sys = network(3, &[(1, 2), (2, 3)]);
        let set = MeasurementSet::new(Vec::new()).unwrap();
        let p = find_maximal_islands(&sys, &set);
        assert_eq!(p.islands, vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn restoration_selects_one_pseudo_per_missing_rank() {
        let sys = network(4, &[(1, 2), (2, 3), (3, 4)]);
        let set = MeasurementSet::new(vec![flow("a", 1)]).unwrap();
        let p = find_maximal_islands(&sys, &set);
        assert_eq!(p.len(), 3);
        let candidates = [
            PseudoMeasurement { kind: PseudoKind::Flow { branch: 2 }, value: 0.0, variance: 1.0 },
            PseudoMeasurement { kind: PseudoKind::Flow { branch: 2 }, value: 0.0, variance: 1.0 },
            PseudoMeasurement { kind: PseudoKind::Injection { bus: 3 }, value: 0.0, variance: 1.0 },
            PseudoMeasurement { kind: PseudoKind::Angle { bus: 4 }, value: 0.0, variance: 1.0 },
        ];
        let r = restore_observability(&sys, &p, &set, &candidates, DEFAULT_PIVOT_THRESHOLD).unwrap();
        assert_eq!(r.selected, vec![0, 2]);
        assert!(r.pivots[1] < 1e-8);

        let mut set = set;
        transfer_pseudo_measurements(&mut set, &candidates, &r.selected).unwrap();
        assert!(find_maximal_islands(&sys, &set).is_observable());
    }

    #[test]
    fn pseudo_outside_ties_is_rejected() {
        let sys = network(3, &[(1, 2), (2, 3)]);
        let set = MeasurementSet::new(vec![flow("a", 1)]).unwrap();
        let p = find_maximal_islands(&sys, &set);
        let bad = [PseudoMeasurement { kind: PseudoKind::Flow { branch: 1 }, value: 0.0, variance: 1.0 }];
        assert_eq!(
            restore_observability(&sys, &p, &set, &bad, DEFAULT_PIVOT_THRESHOLD),
            Err(ObservabilityError::InvalidPseudo(0))
        );
        let bad = [PseudoMeasurement { kind: PseudoKind::Injection { bus: 1 }, value: 0.0, variance: 1.0 }];
        assert_eq!(
            restore_observability(&sys, &p, &set, &bad, DEFAULT_PIVOT_THRESHOLD),
            Err(ObservabilityError::InvalidPseudo(0))
        );
    }

    #[test]
    fn insufficient_pseudos_report_groups() {
        let sys = network(4, &[(1, 2), (2, 3), (3, 4)]);
        let set = MeasurementSet::new(vec![flow("a", 1)]).unwrap();
        let p = find_maximal_islands(&sys, &set);
        let only = [PseudoMeasurement { kind: PseudoKind::Angle { bus: 3 }, value: 0.0, variance: 1.0 }];
        match restore_observability(&sys, &p, &set, &only, DEFAULT_PIVOT_THRESHOLD) {
            Err(ObservabilityError::Unrestorable { selected, groups }) => {
                assert_eq!(selected, vec![0]);
                assert_eq!(groups, vec![vec![4]]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pmu_on_path_and_complete_graph() {
        let path = network(3, &[(1, 2), (2, 3)]);
        let r = place_pmus(&path, &PlacementOptions::default()).unwrap();
        assert_eq!(r.buses, vec![2]);
        let k4 = network(4, &[(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]);
        assert_eq!(place_pmus(&k4, &PlacementOptions::default()).unwrap().buses.len(), 1);
    }

    #[test]
    fn legacy_measurements_reduce_pmus() {
        // Path 1-2-3-4: plain placement needs two PMUs; an injection at
        // bus 3 lets a single PMU at bus 2 do.
        let sys = network(4, &[(1, 2), (2, 3), (3, 4)]);
        assert_eq!(place_pmus(&sys, &PlacementOptions::default()).unwrap().buses.len(), 2);
        let set = MeasurementSet::new(vec![inj("a", 3)]).unwrap();
        let opts = PlacementOptions { legacy: Some(&set), ..Default::default() };
        let r = place_pmus(&sys, &opts).unwrap();
        assert_eq!(r.buses, vec![2]);
    }
}
