//! AC and DC power flow.
//!
//! Each solver is a struct that keeps its workspace between calls: the
//! Jacobian pattern (Newton-Raphson), the factored `B′`/`B″` (fast
//! decoupled), the factored reduced `B` (DC) and the last solution for warm
//! starts. Cached data is keyed by the network's [`Revisions`], so a
//! load-only change reuses everything and a parameter change only triggers
//! an in-place refactorization.

mod dc;
mod decoupled;
mod gauss;
mod newton;

pub use dc::{DcPowerFlow, DcPowerFlowReport};
pub use decoupled::{FastDecoupled, FastDecoupledVariant};
pub use gauss::GaussSeidel;
pub use newton::NewtonRaphson;

use crate::functions::{ac_value, AcState, Quantity, Side};
use crate::network::{BusId, BusKind, NetworkError, PowerSystem};
use crate::sparse::{CscMatrix, SparseError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Consecutive mismatch increases treated as divergence.
    pub divergence_window: usize,
}

impl PowerFlowOptions {
    pub fn newton() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: 50,
            divergence_window: 5,
        }
    }

    pub fn gauss_seidel() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: 1000,
            divergence_window: 20,
        }
    }
}

/// Where an AC solve starts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    /// Unit magnitudes and zero angles except at voltage-controlled buses.
    Flat,
    /// Voltages stored in the case.
    #[default]
    Case,
    /// The solver's previous solution when there is one, else `Case`.
    Warm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    NewtonRaphson,
    FastDecoupledXb,
    FastDecoupledBx,
    GaussSeidel,
    Dc,
}

/// What a solve was able to take over from earlier work.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ReuseEvents {
    pub warm_start: bool,
    /// Matrix pattern (and symbolic analysis) carried over from a prior solve.
    pub pattern_reused: bool,
    /// A factorization from a prior solve was used without any refactoring.
    pub factor_reused: bool,
    pub symbolic_analyses: usize,
    pub refactorizations: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BranchFlow {
    pub from_active: f64,
    pub from_reactive: f64,
    pub to_active: f64,
    pub to_reactive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerFlowReport {
    pub method: Method,
    pub iterations: usize,
    /// Largest absolute power mismatch before each iteration and at the end.
    pub mismatch_trace: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub angle: Vec<f64>,
    pub active_injection: Vec<f64>,
    pub reactive_injection: Vec<f64>,
    pub flows: Vec<BranchFlow>,
    pub reuse: ReuseEvents,
}

impl PowerFlowReport {
    pub fn state(&self) -> AcState {
        AcState::new(self.magnitude.clone(), self.angle.clone())
    }

    /// Total active losses, `Σ_k (P_from + P_to)`.
    pub fn active_losses(&self) -> f64 {
        self.flows.iter().map(|f| f.from_active + f.to_active).sum()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("diverged after {iterations} iterations (mismatch {mismatch:.3e})")]
    Diverged { iterations: usize, mismatch: f64 },
    #[error("no convergence within {iterations} iterations (mismatch {mismatch:.3e})")]
    MaxIterations { iterations: usize, mismatch: f64 },
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("buses {buses:?} are not connected to the slack bus")]
    Island { buses: Vec<BusId> },
}

impl From<SparseError> for PowerFlowError {
    fn from(e: SparseError) -> Self {
        PowerFlowError::Singular(e.to_string())
    }
}

/// Bus roles for an AC solve. Voltage-controlled buses without in-service
/// generation are treated as load buses.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BusSets {
    pub slack: usize,
    pub pq: Vec<usize>,
    /// Non-slack buses in position order.
    pub pvpq: Vec<usize>,
    pub voltage_controlled: Vec<bool>,
}

impl BusSets {
    pub fn classify(sys: &PowerSystem) -> Result<Self, PowerFlowError> {
        let slack = sys.slack_index()?;
        let generating = sys.has_generation();
        let mut pq = Vec::new();
        let mut pvpq = Vec::new();
        let mut voltage_controlled = vec![false; sys.num_buses()];
        for (i, b) in sys.buses().iter().enumerate() {
            if i == slack {
                voltage_controlled[i] = true;
                continue;
            }
            pvpq.push(i);
            if b.kind == BusKind::Pv && generating[i] {
                voltage_controlled[i] = true;
            } else {
                pq.push(i);
            }
        }
        Ok(Self {
            slack,
            pq,
            pvpq,
            voltage_controlled,
        })
    }
}

/// Starting voltages for an AC solve.
pub(crate) fn initial_state(sys: &PowerSystem, sets: &BusSets, start: Start, previous: Option<&AcState>) -> (AcState, bool) {
    if start == Start::Warm {
        if let Some(prev) = previous.filter(|p| p.len() == sys.num_buses()) {
            let mut mag = prev.magnitude.clone();
            let mut ang = prev.angle.clone();
            for (i, b) in sys.buses().iter().enumerate() {
                if sets.voltage_controlled[i] {
                    mag[i] = b.voltage_magnitude;
                }
            }
            ang[sets.slack] = sys.buses()[sets.slack].voltage_angle;
            return (AcState::new(mag, ang), true);
        }
    }
    let mut mag = Vec::with_capacity(sys.num_buses());
    let mut ang = Vec::with_capacity(sys.num_buses());
    for (i, b) in sys.buses().iter().enumerate() {
        match start {
            Start::Flat => {
                mag.push(if sets.voltage_controlled[i] { b.voltage_magnitude } else { 1.0 });
                ang.push(if i == sets.slack { b.voltage_angle } else { 0.0 });
            }
            _ => {
                mag.push(b.voltage_magnitude);
                ang.push(b.voltage_angle);
            }
        }
    }
    (AcState::new(mag, ang), false)
}

/// `S_spec − S_calc` at every bus.
pub(crate) fn power_mismatch(sys: &PowerSystem, state: &AcState, p_spec: &[f64], q_spec: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = sys.ac().injections(state.phasors());
    let dp = s.iter().zip(p_spec).map(|(s, p)| p - s.re).collect();
    let dq = s.iter().zip(q_spec).map(|(s, q)| q - s.im).collect();
    (dp, dq)
}

pub(crate) fn max_mismatch(sets: &BusSets, dp: &[f64], dq: &[f64]) -> f64 {
    let p = sets.pvpq.iter().fold(0.0f64, |m, &i| m.max(dp[i].abs()));
    sets.pq.iter().fold(p, |m, &i| m.max(dq[i].abs()))
}

/// Tracks consecutive mismatch increases.
pub(crate) struct DivergenceGuard {
    window: usize,
    run: usize,
    last: f64,
}

impl DivergenceGuard {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            run: 0,
            last: f64::INFINITY,
        }
    }

    /// Returns true once the mismatch has grown `window` times in a row.
    pub fn diverged(&mut self, mismatch: f64) -> bool {
        if !mismatch.is_finite() {
            return true;
        }
        if mismatch > self.last {
            self.run += 1;
        } else {
            self.run = 0;
        }
        self.last = mismatch;
        self.run >= self.window
    }
}

pub(crate) fn finish_report(
    sys: &PowerSystem,
    method: Method,
    state: AcState,
    iterations: usize,
    mismatch_trace: Vec<f64>,
    reuse: ReuseEvents,
) -> PowerFlowReport {
    let s = sys.ac().injections(state.phasors());
    let flows = (0..sys.branches().len())
        .map(|k| BranchFlow {
            from_active: ac_value(sys, &state, Quantity::ActiveFlow(k, Side::From)),
            from_reactive: ac_value(sys, &state, Quantity::ReactiveFlow(k, Side::From)),
            to_active: ac_value(sys, &state, Quantity::ActiveFlow(k, Side::To)),
            to_reactive: ac_value(sys, &state, Quantity::ReactiveFlow(k, Side::To)),
        })
        .collect();
    PowerFlowReport {
        method,
        iterations,
        mismatch_trace,
        active_injection: s.iter().map(|c| c.re).collect(),
        reactive_injection: s.iter().map(|c| c.im).collect(),
        magnitude: state.magnitude,
        angle: state.angle,
        flows,
        reuse,
    }
}

/// Principal submatrix on `keep` (new index per old index) with a map from
/// source value slots to target slots, for in-place value refreshes.
#[derive(Debug, Clone)]
pub(crate) struct Submatrix {
    pub matrix: CscMatrix<f64>,
    slots: Vec<(usize, usize)>,
}

impl Submatrix {
    pub fn extract(src: &CscMatrix<f64>, keep: &[Option<usize>], dim: usize) -> Self {
        let mut trip = Vec::new();
        let mut source_slots = Vec::new();
        for j in 0..src.ncols() {
            let Some(nj) = keep[j] else { continue };
            let start = src.col_ptr()[j];
            for (p, &i) in src.col(j).0.iter().enumerate() {
                if let Some(ni) = keep[i] {
                    trip.push((ni, nj, 0.0));
                    source_slots.push(start + p);
                }
            }
        }
        let coords: Vec<(usize, usize)> = trip.iter().map(|&(i, j, _)| (i, j)).collect();
        let (map, matrix) = crate::sparse::PatternMap::build::<f64>(dim, dim, &coords).expect("indices in range");
        let slots = source_slots.iter().enumerate().map(|(t, &s)| (s, map.slot(t))).collect();
        let mut out = Self { matrix, slots };
        out.refresh(src);
        out
    }

    pub fn refresh(&mut self, src: &CscMatrix<f64>) {
        self.matrix.clear_values();
        let sv = src.values();
        let tv = self.matrix.values_mut();
        for &(s, t) in &self.slots {
            tv[t] += sv[s];
        }
    }
}

/// Buses not reachable from `root` over in-service branches.
pub(crate) fn unreachable_buses(sys: &PowerSystem, root: usize) -> Vec<BusId> {
    let adj = sys.adjacency();
    let mut seen = vec![false; sys.num_buses()];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    sys.buses()
        .iter()
        .zip(&seen)
        .filter(|(_, &s)| !s)
        .map(|(b, _)| b.id)
        .collect()
}

