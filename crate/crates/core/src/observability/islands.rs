use super::dense::null_space;
use super::{injection_row, measured_flows, measured_injections};
use crate::measurement::MeasurementSet;
use crate::network::{BusId, PowerSystem};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IslandKind {
    Flow,
    Maximal,
}

/// A partition of the buses into observable islands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IslandPartition {
    pub kind: IslandKind,
    /// Bus ids per island, islands ordered by their first bus position.
    pub islands: Vec<Vec<BusId>>,
    /// Island index of every bus position.
    pub bus_island: Vec<usize>,
    /// In-service branches (0-based) whose ends lie in different islands.
    pub tie_branches: Vec<usize>,
    /// Ends of tie branches, ascending bus id.
    pub tie_buses: Vec<BusId>,
}

impl IslandPartition {
    pub fn len(&self) -> usize {
        self.islands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.islands.is_empty()
    }

    /// True when every bus belongs to a single island.
    pub fn is_observable(&self) -> bool {
        self.islands.len() == 1
    }

    pub fn island_of(&self, sys: &PowerSystem, bus: BusId) -> Option<usize> {
        sys.bus_index(bus).map(|i| self.bus_island[i])
    }

    fn from_labels(sys: &PowerSystem, kind: IslandKind, labels: &[usize]) -> Self {
        // Renumber labels by first appearance so the ordering is canonical.
        let mut remap = vec![usize::MAX; labels.len()];
        let mut islands: Vec<Vec<BusId>> = Vec::new();
        let mut bus_island = vec![0; labels.len()];
        for (i, &l) in labels.iter().enumerate() {
            if remap[l] == usize::MAX {
                remap[l] = islands.len();
                islands.push(Vec::new());
            }
            bus_island[i] = remap[l];
            islands[remap[l]].push(sys.buses()[i].id);
        }
        let mut tie_branches = Vec::new();
        let mut tie = vec![false; labels.len()];
        for (k, br) in sys.branches().iter().enumerate() {
            if !br.in_service {
                continue;
            }
            let (f, t) = sys.branch_ends(k);
            if bus_island[f] != bus_island[t] {
                tie_branches.push(k);
                tie[f] = true;
                tie[t] = true;
            }
        }
        let mut tie_buses: Vec<BusId> = (0..labels.len()).filter(|&i| tie[i]).map(|i| sys.buses()[i].id).collect();
        tie_buses.sort_unstable();
        Self {
            kind,
            islands,
            bus_island,
            tie_branches,
            tie_buses,
        }
    }
}

struct DisjointSets(Vec<usize>);

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.0[hi] = lo;
        true
    }

    fn labels(&mut self) -> Vec<usize> {
        (0..self.0.len()).map(|i| self.find(i)).collect()
    }
}

/// Flow islands: buses joined by measured branch flows, then pairs of
/// islands joined by an injection whose bus and neighbours touch exactly
/// those two islands, repeated until nothing changes.
pub fn find_flow_islands(sys: &PowerSystem, set: &MeasurementSet) -> IslandPartition {
    let n = sys.num_buses();
    let mut ds = DisjointSets::new(n);
    for (k, _) in measured_flows(sys, set) {
        let (f, t) = sys.branch_ends(k);
        ds.union(f, t);
    }
    let adjacency = sys.adjacency();
    let injections = measured_injections(sys, set);
    loop {
        let mut changed = false;
        for &i in &injections {
            let mut roots: Vec<usize> = std::iter::once(i)
                .chain(adjacency[i].iter().copied())
                .map(|b| ds.find(b))
                .collect();
            roots.sort_unstable();
            roots.dedup();
            if roots.len() == 2 {
                changed |= ds.union(roots[0], roots[1]);
            }
        }
        if !changed {
            break;
        }
    }
    IslandPartition::from_labels(sys, IslandKind::Flow, &ds.labels())
}

/// Maximal observable islands: flow islands further merged wherever every
/// injection measurement together forces equal island angles. Two islands
/// merge exactly when their rows in a null-space basis of the island-reduced
/// injection matrix coincide.
pub fn find_maximal_islands(sys: &PowerSystem, set: &MeasurementSet) -> IslandPartition {
    let flow = find_flow_islands(sys, set);
    let s = flow.len();
    if s <= 1 {
        return IslandPartition { kind: IslandKind::Maximal, ..flow };
    }
    let adjacency = sys.adjacency();
    let mut rows = Vec::new();
    for i in measured_injections(sys, set) {
        let mut row = vec![0.0; s];
        for (b, v) in injection_row(&adjacency, i) {
            row[flow.bus_island[b]] += v;
        }
        if row.iter().any(|&v| v != 0.0) {
            rows.push(row);
        }
    }
    let basis = null_space(&rows, s);
    let signature = |c: usize| -> Vec<f64> { basis.iter().map(|v| v[c]).collect() };
    let mut group = vec![usize::MAX; s];
    let mut reps: Vec<Vec<f64>> = Vec::new();
    for c in 0..s {
        let sig = signature(c);
        let scale = sig.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        match reps
            .iter()
            .position(|r| r.iter().zip(&sig).all(|(a, b)| (a - b).abs() <= 1e-8 * scale))
        {
            Some(g) => group[c] = g,
            None => {
                group[c] = reps.len();
                reps.push(sig);
            }
        }
    }
    let labels: Vec<usize> = flow.bus_island.iter().map(|&c| group[c]).collect();
    IslandPartition::from_labels(sys, IslandKind::Maximal, &labels)
}
