//! Seeded synthetic networks for scale tests.
//!
//! Buses sit on a near-square lattice. A random spanning tree of lattice
//! edges keeps the network connected, and further lattice edges are added
//! with a fixed probability, which gives transmission-like sparsity (average
//! degree about 2.6). Every tenth bus hosts a generator and the slack takes
//! whatever the loads leave unbalanced.

use crate::network::{Branch, Bus, BusKind, CostCurve, Generator, NetworkError, PowerSystem};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOptions {
    pub buses: usize,
    pub seed: u64,
    /// Probability of keeping each lattice edge outside the spanning tree.
    pub extra_edge_probability: f64,
    /// One generator per this many buses.
    pub generator_spacing: usize,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            buses: 10_000,
            seed: 1,
            extra_edge_probability: 0.3,
            generator_spacing: 10,
        }
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Builds a connected network with loads, generators and linear costs.
pub fn synthetic_network(options: &SyntheticOptions) -> Result<PowerSystem, NetworkError> {
    let n = options.buses.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let width = (n as f64).sqrt().ceil() as usize;
    let mut edges = Vec::new();
    for i in 0..n {
        if (i + 1) % width != 0 && i + 1 < n {
            edges.push((i, i + 1));
        }
        if i + width < n {
            edges.push((i, i + width));
        }
    }
    edges.shuffle(&mut rng);
    let mut parent: Vec<usize> = (0..n).collect();
    let mut chosen = Vec::new();
    for &(a, b) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra] = rb;
            chosen.push((a, b));
        } else if rng.random_bool(options.extra_edge_probability) {
            chosen.push((a, b));
        }
    }
    chosen.sort_unstable();

    let spacing = options.generator_spacing.max(1);
    let mut buses = Vec::with_capacity(n);
    let mut total_load = 0.0;
    for i in 0..n {
        let kind = if i == 0 {
            BusKind::Slack
        } else if i % spacing == 0 {
            BusKind::Pv
        } else {
            BusKind::Pq
        };
        let mut bus = Bus::new(i + 1, kind);
        if kind == BusKind::Pq {
            bus.active_load = rng.random_range(0.05..0.3);
            bus.reactive_load = bus.active_load * rng.random_range(0.1..0.4);
            total_load += bus.active_load;
        }
        buses.push(bus);
    }
    let branches = chosen
        .into_iter()
        .map(|(a, b)| {
            let x = rng.random_range(0.02..0.12);
            let mut br = Branch::line(a + 1, b + 1, x * rng.random_range(0.1..0.3), x);
            br.shunt_susceptance = rng.random_range(0.0..0.05);
            br
        })
        .collect();
    let units = n.div_ceil(spacing);
    let share = total_load / units as f64;
    let generators = (0..n)
        .step_by(spacing)
        .map(|i| {
            let mut g = Generator::new(i + 1, if i == 0 { 0.0 } else { share * rng.random_range(0.8..1.0) });
            g.active_max = 3.0 * share;
            g.cost = Some(CostCurve::Polynomial {
                coefficients: vec![0.0, rng.random_range(10.0..50.0)],
            });
            g
        })
        .collect();
    PowerSystem::new(100.0, buses, branches, generators)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn connected_and_deterministic() {
        let o = SyntheticOptions {
            buses: 400,
            ..Default::default()
        };
        let a = synthetic_network(&o).unwrap();
        assert_eq!(a, synthetic_network(&o).unwrap());
        assert_eq!(a.num_buses(), 400);
        let adj = a.adjacency();
        let mut seen = vec![false; 400];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
        let degree = 2.0 * a.branches().len() as f64 / 400.0;
        assert!((2.2..3.0).contains(&degree), "{degree}");
    }
}
