use gridstate::functions::Side;
use gridstate::io::load_network;
use gridstate::measurement::{Measurement, MeasurementKind, MeasurementSet};
use gridstate::network::PowerSystem;
use gridstate::observability::{
    decoupled_rows, find_flow_islands, find_maximal_islands, place_pmus, restore_observability, transfer_pseudo_measurements,
    PlacementOptions, PseudoKind, PseudoMeasurement, DEFAULT_PIVOT_THRESHOLD,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use std::path::PathBuf;

fn case(name: &str) -> PowerSystem {
    load_network(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("cases").join(name)).unwrap()
}

/// Active flows and injections selected by the masks.
fn active_set(sys: &PowerSystem, flows: &[bool], injections: &[bool]) -> MeasurementSet {
    let mut out = Vec::new();
    for (k, _) in sys.branches().iter().enumerate().filter(|(k, _)| flows[*k % flows.len()]) {
        out.push(Measurement::new(format!("f{}", k + 1), MeasurementKind::Pflow, k + 1, 0.0, 1e-4).with_side(Side::From));
    }
    for (_, b) in sys.buses().iter().enumerate().filter(|(i, _)| injections[*i % injections.len()]) {
        out.push(Measurement::new(format!("p{}", b.id), MeasurementKind::Pinj, b.id, 0.0, 1e-4));
    }
    MeasurementSet::new(out).unwrap()
}

fn matrix(sys: &PowerSystem, set: &MeasurementSet, extra: &[Vec<f64>]) -> DMatrix<f64> {
    let n = sys.num_buses();
    let rows = decoupled_rows(sys, set, true);
    let mut m = DMatrix::zeros(rows.len() + extra.len(), n);
    for (r, (_, row)) in rows.iter().enumerate() {
        for &(c, v) in row {
            m[(r, c)] += v;
        }
    }
    for (r, row) in extra.iter().enumerate() {
        for c in 0..n {
            m[(rows.len() + r, c)] = row[c];
        }
    }
    m
}

fn rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 {
        return 0;
    }
    m.clone().svd(false, false).rank(1e-8)
}

fn difference(n: usize, i: usize, j: usize) -> Vec<f64> {
    let mut d = vec![0.0; n];
    d[i] = 1.0;
    d[j] = -1.0;
    d
}

fn masks(n: usize) -> impl Strategy<Value = Vec<bool>> {
    proptest::collection::vec(proptest::bool::weighted(0.35), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn maximal_islands_match_the_dense_rank_oracle(flows in masks(20), inj in masks(14)) {
        let sys = case("case14.m");
        let set = active_set(&sys, &flows, &inj);
        let maximal = find_maximal_islands(&sys, &set);
        let flow = find_flow_islands(&sys, &set);
        let n = sys.num_buses();
        let h = matrix(&sys, &set, &[]);
        let base = rank(&h);

        // Every bus sits in exactly one island.
        let mut seen = vec![0; n];
        for island in &maximal.islands {
            for &id in island {
                seen[sys.bus_index(id).unwrap()] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));

        for i in 0..n {
            for j in (i + 1)..n {
                let determined = rank(&matrix(&sys, &set, &[difference(n, i, j)])) == base;
                prop_assert_eq!(maximal.bus_island[i] == maximal.bus_island[j], determined, "buses {} {}", i, j);
                if flow.bus_island[i] == flow.bus_island[j] {
                    prop_assert!(maximal.bus_island[i] == maximal.bus_island[j]);
                }
            }
        }
        prop_assert_eq!(maximal.is_observable(), base == n - 1);
    }

    #[test]
    fn restoration_is_minimal_and_restores_full_rank(flows in masks(20), inj in masks(14)) {
        let sys = case("case14.m");
        let mut set = active_set(&sys, &flows, &inj);
        let partition = find_maximal_islands(&sys, &set);
        let n = sys.num_buses();
        let mut candidates: Vec<PseudoMeasurement> = partition
            .tie_branches
            .iter()
            .map(|&k| PseudoMeasurement { kind: PseudoKind::Flow { branch: k + 1 }, value: 0.0, variance: 1.0 })
            .collect();
        candidates.extend(partition.tie_buses.iter().map(|&bus| PseudoMeasurement {
            kind: PseudoKind::Injection { bus },
            value: 0.0,
            variance: 1.0,
        }));
        let before = rank(&matrix(&sys, &set, &[]));
        let r = restore_observability(&sys, &partition, &set, &candidates, DEFAULT_PIVOT_THRESHOLD).unwrap();
        // No subset smaller than the rank deficit can close it.
        prop_assert_eq!(r.selected.len(), n - 1 - before);
        transfer_pseudo_measurements(&mut set, &candidates, &r.selected).unwrap();
        prop_assert_eq!(rank(&matrix(&sys, &set, &[])), n - 1);
        prop_assert!(find_maximal_islands(&sys, &set).is_observable());
    }
}

/// The placement constraint model, restated bus by bus.
fn covers(sys: &PowerSystem, legacy: Option<&MeasurementSet>, pmu: &[bool]) -> bool {
    let adj = sys.adjacency();
    let n = sys.num_buses();
    let count = |i: usize| pmu[i] as usize + adj[i].iter().filter(|&&k| pmu[k]).count();
    let mut touched = vec![false; n];
    if let Some(set) = legacy {
        for m in set.measurements().iter().filter(|m| m.in_service) {
            match m.kind {
                MeasurementKind::Pflow => {
                    let (f, t) = sys.branch_ends(m.element - 1);
                    touched[f] = true;
                    touched[t] = true;
                    if count(f) + count(t) < 1 {
                        return false;
                    }
                }
                MeasurementKind::Pinj => {
                    let i = sys.bus_index(m.element).unwrap();
                    touched[i] = true;
                    let mut total = count(i);
                    for &k in &adj[i] {
                        touched[k] = true;
                        total += count(k);
                    }
                    if total < adj[i].len() {
                        return false;
                    }
                }
                _ => {}
            }
        }
    }
    (0..n).all(|i| touched[i] || count(i) >= 1)
}

fn brute_force_minimum(sys: &PowerSystem, legacy: Option<&MeasurementSet>) -> usize {
    let n = sys.num_buses();
    (0u32..(1 << n))
        .filter(|mask| {
            let pmu: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            covers(sys, legacy, &pmu)
        })
        .map(|mask| mask.count_ones() as usize)
        .min()
        .unwrap()
}

fn placed(sys: &PowerSystem, legacy: Option<&MeasurementSet>) -> Vec<bool> {
    let p = place_pmus(sys, &PlacementOptions { legacy, ..Default::default() }).unwrap();
    let mut pmu = vec![false; sys.num_buses()];
    for id in p.buses {
        pmu[sys.bus_index(id).unwrap()] = true;
    }
    pmu
}

#[test]
fn pmu_placement_without_legacy_is_minimal_and_observable() {
    for name in ["case9.m", "case14.m"] {
        let sys = case(name);
        let pmu = placed(&sys, None);
        assert!(covers(&sys, None, &pmu));
        assert_eq!(pmu.iter().filter(|&&p| p).count(), brute_force_minimum(&sys, None), "{name}");

        // Angles at every PMU bus and its neighbours pin every angle.
        let n = sys.num_buses();
        let adj = sys.adjacency();
        let mut rows = Vec::new();
        for i in (0..n).filter(|&i| pmu[i]) {
            for k in std::iter::once(i).chain(adj[i].iter().copied()) {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                rows.push(e);
            }
        }
        assert_eq!(rank(&DMatrix::from_fn(rows.len(), n, |r, c| rows[r][c])), n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pmu_placement_with_legacy_matches_exhaustive_search(flows in masks(20), inj in masks(14)) {
        let sys = case("case14.m");
        let legacy = active_set(&sys, &flows, &inj);
        let pmu = placed(&sys, Some(&legacy));
        prop_assert!(covers(&sys, Some(&legacy), &pmu));
        prop_assert_eq!(pmu.iter().filter(|&&p| p).count(), brute_force_minimum(&sys, Some(&legacy)));
    }
}
