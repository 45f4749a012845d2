use super::CscMatrix;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Column ordering applied before factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    Natural,
    #[default]
    MinimumDegree,
}

impl Ordering {
    /// Column permutation for `a`; square matrices are ordered on the pattern
    /// of `A + Aᵀ`, rectangular ones on the pattern of `AᵀA`.
    pub fn permutation(self, a: &CscMatrix<f64>) -> Vec<usize> {
        match self {
            Ordering::Natural => (0..a.ncols()).collect(),
            Ordering::MinimumDegree => {
                let adj = if a.nrows() == a.ncols() {
                    symmetric_adjacency(a)
                } else {
                    normal_adjacency(a)
                };
                minimum_degree(adj)
            }
        }
    }
}

fn symmetric_adjacency(a: &CscMatrix<f64>) -> Vec<BTreeSet<usize>> {
    let n = a.ncols();
    let mut adj = vec![BTreeSet::new(); n];
    for j in 0..n {
        for &i in a.col(j).0 {
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }
    }
    adj
}

fn normal_adjacency(a: &CscMatrix<f64>) -> Vec<BTreeSet<usize>> {
    let at = a.transpose();
    let mut adj = vec![BTreeSet::new(); a.ncols()];
    for r in 0..a.nrows() {
        let cols = at.col(r).0;
        for &p in cols {
            for &q in cols {
                if p != q {
                    adj[p].insert(q);
                }
            }
        }
    }
    adj
}

/// Basic minimum-degree ordering on an explicit elimination graph.
///
/// Ties are broken by the lowest node index, so the result is deterministic.
pub fn minimum_degree(mut adj: Vec<BTreeSet<usize>>) -> Vec<usize> {
    let n = adj.len();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        eliminated[v] = true;
        order.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                adj[u].insert(w);
                adj[w].insert(u);
            }
        }
        for &u in &nbrs {
            debug_assert!(!eliminated[u]);
            queue.insert((adj[u].len(), u));
        }
    }
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_center_is_eliminated_last() {
        // arrow matrix: node 0 connected to all others
        let n = 6;
        let mut adj = vec![BTreeSet::new(); n];
        for v in 1..n {
            adj[0].insert(v);
            adj[v].insert(0);
        }
        let order = minimum_degree(adj);
        let pos = order.iter().position(|&v| v == 0).unwrap();
        assert!(pos >= n - 2, "hub eliminated too early: {order:?}");
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}
