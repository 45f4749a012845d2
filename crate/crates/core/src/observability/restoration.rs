use super::dense::{null_space, rank};
use super::{injection_row, IslandPartition, ObservabilityError};
use crate::functions::Side;
use crate::measurement::{Coordinates, Measurement, MeasurementError, MeasurementKind, MeasurementSet};
use crate::network::{BusId, PowerSystem};
use crate::sparse::{CscMatrix, Ordering, QrFactorization};
use serde::{Deserialize, Serialize};

/// Relative threshold on `|R_ii|` below which a pseudo row is redundant.
pub const DEFAULT_PIVOT_THRESHOLD: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PseudoKind {
    /// Active flow at the from-side of a branch (1-based label).
    Flow { branch: usize },
    Injection { bus: BusId },
    Angle { bus: BusId },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoMeasurement {
    #[serde(flatten)]
    pub kind: PseudoKind,
    pub value: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Restoration {
    /// Indices into the candidate list, in candidate order.
    pub selected: Vec<usize>,
    /// Measurement positions of the retained rows.
    pub retained: Vec<usize>,
    /// `|R_ii|` of every candidate row.
    pub pivots: Vec<f64>,
}

fn reduced_row(row: Vec<(usize, f64)>, partition: &IslandPartition, column: &[Option<usize>], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; s];
    for (b, v) in row {
        if let Some(c) = column[partition.bus_island[b]] {
            out[c] += v;
        }
    }
    out
}

/// Chooses a non-redundant subset of candidate pseudo-measurements that
/// makes the network observable.
///
/// Retained rows are the tie injections and bus angles already present.
/// Candidate rows follow them in the Gram matrix `D = H·Hᵀ` of the
/// island-reduced decoupled model (reference island column removed), and a
/// candidate is kept when its diagonal in the QR factor of `D` is not
/// negligible relative to the largest one.
pub fn restore_observability(
    sys: &PowerSystem,
    partition: &IslandPartition,
    set: &MeasurementSet,
    candidates: &[PseudoMeasurement],
    threshold: f64,
) -> Result<Restoration, ObservabilityError> {
    let adjacency = sys.adjacency();
    let islands = partition.len();
    let slack = sys.slack_index()?;
    let reference = partition.bus_island[slack];
    let mut column = vec![None; islands];
    let mut s = 0;
    for (c, col) in column.iter_mut().enumerate() {
        if c != reference {
            *col = Some(s);
            s += 1;
        }
    }

    let tie_bus = |i: usize| partition.tie_buses.binary_search(&sys.buses()[i].id).is_ok();
    let mut retained = Vec::new();
    let mut rows = Vec::new();
    for (p, m) in set.measurements().iter().enumerate() {
        if !m.in_service {
            continue;
        }
        let Some(i) = sys.bus_index(m.element) else { continue };
        let row = match m.kind {
            MeasurementKind::Pinj if tie_bus(i) => injection_row(&adjacency, i),
            MeasurementKind::VphasorAng => vec![(i, 1.0)],
            _ => continue,
        };
        retained.push(p);
        rows.push(reduced_row(row, partition, &column, s));
    }
    let first_candidate = rows.len();
    for (k, c) in candidates.iter().enumerate() {
        let row = match c.kind {
            PseudoKind::Flow { branch } => {
                let idx = branch.wrapping_sub(1);
                if idx >= sys.branches().len() {
                    return Err(ObservabilityError::UnknownElement { index: k, element: branch });
                }
                if partition.tie_branches.binary_search(&idx).is_err() {
                    return Err(ObservabilityError::InvalidPseudo(k));
                }
                let (f, t) = sys.branch_ends(idx);
                vec![(f, 1.0), (t, -1.0)]
            }
            PseudoKind::Injection { bus } => {
                let i = sys.bus_index(bus).ok_or(ObservabilityError::UnknownElement { index: k, element: bus })?;
                if !tie_bus(i) {
                    return Err(ObservabilityError::InvalidPseudo(k));
                }
                injection_row(&adjacency, i)
            }
            PseudoKind::Angle { bus } => {
                let i = sys.bus_index(bus).ok_or(ObservabilityError::UnknownElement { index: k, element: bus })?;
                vec![(i, 1.0)]
            }
        };
        rows.push(reduced_row(row, partition, &column, s));
    }

    let mut selected = Vec::new();
    let mut pivots = vec![0.0; candidates.len()];
    if s > 0 && !rows.is_empty() {
        let m = rows.len();
        let mut triplets = Vec::new();
        for a in 0..m {
            for b in a..m {
                let d: f64 = rows[a].iter().zip(&rows[b]).map(|(x, y)| x * y).sum();
                if d != 0.0 {
                    triplets.push((a, b, d));
                    if a != b {
                        triplets.push((b, a, d));
                    }
                }
            }
        }
        let gram = CscMatrix::from_triplets(m, m, &triplets).expect("triplets within bounds");
        let qr = QrFactorization::factor_with(&gram, Ordering::Natural).expect("square Gram matrix");
        let diag: Vec<f64> = qr.r_diagonal().iter().map(|v| v.abs()).collect();
        let largest = diag.iter().fold(0.0f64, |a, &b| a.max(b));
        for (k, p) in pivots.iter_mut().enumerate() {
            *p = diag[first_candidate + k];
            if largest > 0.0 && *p >= threshold * largest {
                selected.push(k);
            }
        }
    }

    let mut combined: Vec<Vec<f64>> = rows[..first_candidate].to_vec();
    combined.extend(selected.iter().map(|&k| rows[first_candidate + k].clone()));
    if rank(&combined, s) < s {
        return Err(ObservabilityError::Unrestorable {
            groups: unobservable_groups(partition, &column, &rows, s),
            selected,
        });
    }
    Ok(Restoration {
        selected,
        retained,
        pivots,
    })
}

/// Groups of islands that stay undetermined relative to the reference.
fn unobservable_groups(partition: &IslandPartition, column: &[Option<usize>], rows: &[Vec<f64>], s: usize) -> Vec<Vec<BusId>> {
    let basis = null_space(rows, s);
    let mut groups: Vec<(Vec<f64>, Vec<BusId>)> = Vec::new();
    for (island, col) in column.iter().enumerate() {
        let Some(c) = *col else { continue };
        let sig: Vec<f64> = basis.iter().map(|v| v[c]).collect();
        if sig.iter().all(|x| x.abs() < 1e-8) {
            continue;
        }
        let buses = &partition.islands[island];
        match groups
            .iter_mut()
            .find(|(g, _)| g.iter().zip(&sig).all(|(a, b)| (a - b).abs() < 1e-8))
        {
            Some((_, members)) => members.extend(buses),
            None => groups.push((sig, buses.clone())),
        }
    }
    groups
        .into_iter()
        .map(|(_, mut b)| {
            b.sort_unstable();
            b
        })
        .collect()
}

/// Adds the selected candidates to a measurement set with ids `pseudo-1`,
/// `pseudo-2`, ... (skipping ids already taken). Angles become polar voltage
/// phasors with unit magnitude.
pub fn transfer_pseudo_measurements(
    set: &mut MeasurementSet,
    candidates: &[PseudoMeasurement],
    selected: &[usize],
) -> Result<Vec<String>, MeasurementError> {
    let mut next = 1usize;
    let mut fresh_id = |set: &MeasurementSet| loop {
        let id = format!("pseudo-{next}");
        next += 1;
        if set.position(&id).is_none() {
            return id;
        }
    };
    let mut ids = Vec::new();
    for &k in selected {
        let c = &candidates[k];
        match c.kind {
            PseudoKind::Flow { branch } => {
                let id = fresh_id(set);
                set.push(Measurement::new(id.clone(), MeasurementKind::Pflow, branch, c.value, c.variance).with_side(Side::From))?;
                ids.push(id);
            }
            PseudoKind::Injection { bus } => {
                let id = fresh_id(set);
                set.push(Measurement::new(id.clone(), MeasurementKind::Pinj, bus, c.value, c.variance))?;
                ids.push(id);
            }
            PseudoKind::Angle { bus } => {
                let mag = fresh_id(set);
                set.push(
                    Measurement::new(mag.clone(), MeasurementKind::VphasorMag, bus, 1.0, c.variance)
                        .with_coordinates(Coordinates::Polar),
                )?;
                let ang = fresh_id(set);
                set.push(
                    Measurement::new(ang.clone(), MeasurementKind::VphasorAng, bus, c.value, c.variance)
                        .with_coordinates(Coordinates::Polar),
                )?;
                ids.push(mag);
                ids.push(ang);
            }
        }
    }
    Ok(ids)
}
