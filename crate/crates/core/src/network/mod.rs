//! Bus/branch network with the unified branch model and the AC (nodal
//! admittance) and DC (nodal susceptance) matrices built from it.
//!
//! All quantities are per-unit on the system base and angles are radians.
//! Matrices are assembled once and then patched in place by
//! [`PowerSystem::apply`]; revision counters tell solvers which cached
//! matrices, patterns and factorizations are still valid.

mod ac;
mod change;
mod dc;

pub use ac::{branch_block, AcModel, BranchBlock};
pub use change::{Change, ChangeEffect, Dirty};
pub use dc::{branch_susceptance, DcModel};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};
use thiserror::Error;

pub type BusId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Slack,
    Pq,
    Pv,
}

impl BusKind {
    /// MATPOWER bus type code.
    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            1 => Some(BusKind::Pq),
            2 => Some(BusKind::Pv),
            3 => Some(BusKind::Slack),
            _ => None,
        }
    }

    pub fn code(self) -> u32 {
        match self {
            BusKind::Pq => 1,
            BusKind::Pv => 2,
            BusKind::Slack => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub kind: BusKind,
    pub voltage_magnitude: f64,
    pub voltage_angle: f64,
    pub active_load: f64,
    pub reactive_load: f64,
    pub shunt_conductance: f64,
    pub shunt_susceptance: f64,
    /// 0 means unspecified.
    pub base_kv: f64,
}

impl Bus {
    pub fn new(id: BusId, kind: BusKind) -> Self {
        Self {
            id,
            kind,
            voltage_magnitude: 1.0,
            voltage_angle: 0.0,
            active_load: 0.0,
            reactive_load: 0.0,
            shunt_conductance: 0.0,
            shunt_susceptance: 0.0,
            base_kv: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: BusId,
    pub to_bus: BusId,
    pub resistance: f64,
    pub reactance: f64,
    /// Total shunt conductance, half on each side.
    pub shunt_conductance: f64,
    /// Total charging susceptance, half on each side.
    pub shunt_susceptance: f64,
    pub turns_ratio: f64,
    pub phase_shift: f64,
    /// Long-term active flow limit; 0 means unlimited.
    pub rating: f64,
    pub in_service: bool,
}

impl Branch {
    pub fn line(from_bus: BusId, to_bus: BusId, resistance: f64, reactance: f64) -> Self {
        Self {
            from_bus,
            to_bus,
            resistance,
            reactance,
            shunt_conductance: 0.0,
            shunt_susceptance: 0.0,
            turns_ratio: 1.0,
            phase_shift: 0.0,
            rating: 0.0,
            in_service: true,
        }
    }

    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(self.resistance, self.reactance).inv()
    }

    /// `τ⁻¹ e^{−jφ}`.
    pub fn complex_ratio(&self) -> Complex64 {
        Complex64::from_polar(1.0 / self.turns_ratio, -self.phase_shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostCurve {
    /// `Σ_k c_k P^k` with coefficients in ascending degree, `P` per-unit.
    Polynomial { coefficients: Vec<f64> },
    /// `(P, cost)` breakpoints, `P` per-unit.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl CostCurve {
    pub fn validate(&self) -> Result<(), NetworkError> {
        match self {
            CostCurve::Polynomial { coefficients } => {
                if coefficients.iter().all(|c| c.is_finite()) {
                    Ok(())
                } else {
                    Err(NetworkError::InvalidCost("non-finite coefficient".into()))
                }
            }
            CostCurve::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return Err(NetworkError::InvalidCost("piecewise curve needs two points".into()));
                }
                let mut last_slope = f64::NEG_INFINITY;
                for w in points.windows(2) {
                    let dp = w[1].0 - w[0].0;
                    if !(dp > 0.0) {
                        return Err(NetworkError::InvalidCost("breakpoints must increase in power".into()));
                    }
                    let slope = (w[1].1 - w[0].1) / dp;
                    if slope < last_slope - 1e-12 * slope.abs().max(1.0) {
                        return Err(NetworkError::InvalidCost("piecewise curve is not convex".into()));
                    }
                    last_slope = slope;
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, p: f64) -> f64 {
        match self {
            CostCurve::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * p + c),
            CostCurve::PiecewiseLinear { points } => {
                let k = points
                    .windows(2)
                    .position(|w| p <= w[1].0)
                    .unwrap_or(points.len() - 2);
                let (a, b) = (points[k], points[k + 1]);
                a.1 + (b.1 - a.1) * (p - a.0) / (b.0 - a.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub active_power: f64,
    pub reactive_power: f64,
    #[serde(with = "extended_float")]
    pub active_min: f64,
    #[serde(with = "extended_float")]
    pub active_max: f64,
    #[serde(with = "extended_float")]
    pub reactive_min: f64,
    #[serde(with = "extended_float")]
    pub reactive_max: f64,
    pub voltage_setpoint: f64,
    pub cost: Option<CostCurve>,
    pub in_service: bool,
}

impl Generator {
    pub fn new(bus: BusId, active_power: f64) -> Self {
        Self {
            bus,
            active_power,
            reactive_power: 0.0,
            active_min: 0.0,
            active_max: f64::INFINITY,
            reactive_min: f64::NEG_INFINITY,
            reactive_max: f64::INFINITY,
            voltage_setpoint: 1.0,
            cost: None,
            in_service: true,
        }
    }
}

/// JSON has no infinities; generator limits use the strings `"inf"` and
/// `"-inf"` for them.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else if *v == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("invalid number '{t}'"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("more than one slack bus ({0} and {1})")]
    DuplicateSlack(BusId, BusId),
    #[error("no slack bus")]
    NoSlack,
    #[error("unknown bus {0}")]
    UnknownBus(BusId),
    #[error("unknown branch {0}")]
    UnknownBranch(usize),
    #[error("unknown generator {0}")]
    UnknownGenerator(usize),
    #[error("branch {0} has zero turns ratio")]
    ZeroTurnsRatio(usize),
    #[error("branch {0} has zero series impedance")]
    ZeroImpedance(usize),
    #[error("branch {0} connects a bus to itself")]
    SelfLoop(usize),
    #[error("in-service branch {0} has zero reactance (DC model undefined)")]
    ZeroReactance(usize),
    #[error("base values must be positive")]
    NonPositiveBase,
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error("invalid cost curve: {0}")]
    InvalidCost(String),
}

/// Stamps refreshed whenever the corresponding data changes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Revisions {
    pub ac_pattern: u64,
    pub ac_values: u64,
    pub dc_pattern: u64,
    pub dc_values: u64,
    pub injections: u64,
    pub bus_kinds: u64,
}

#[derive(Debug, Clone)]
pub struct PowerSystem {
    base_mva: f64,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    index: HashMap<BusId, usize>,
    ac: AcModel,
    dc: Option<DcModel>,
    revisions: Revisions,
}

static CLOCK: AtomicU64 = AtomicU64::new(1);

/// Revision stamps are drawn from one process-wide counter, so two systems
/// (or two diverging clones) never share a stamp for different data.
pub(crate) fn next_stamp() -> u64 {
    CLOCK.fetch_add(1, AtomicOrdering::Relaxed)
}

impl PartialEq for PowerSystem {
    fn eq(&self, other: &Self) -> bool {
        self.base_mva.to_bits() == other.base_mva.to_bits()
            && self.buses == other.buses
            && self.branches == other.branches
            && self.generators == other.generators
    }
}

impl PowerSystem {
    pub fn new(
        base_mva: f64,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        generators: Vec<Generator>,
    ) -> Result<Self, NetworkError> {
        if !(base_mva > 0.0) {
            return Err(NetworkError::NonPositiveBase);
        }
        let mut index = HashMap::with_capacity(buses.len());
        let mut slack: Option<BusId> = None;
        for (k, b) in buses.iter().enumerate() {
            if index.insert(b.id, k).is_some() {
                return Err(NetworkError::DuplicateBus(b.id));
            }
            if b.kind == BusKind::Slack {
                if let Some(s) = slack {
                    return Err(NetworkError::DuplicateSlack(s, b.id));
                }
                slack = Some(b.id);
            }
            if b.base_kv < 0.0 || !b.voltage_magnitude.is_finite() || !b.voltage_angle.is_finite() {
                return Err(NetworkError::InvalidValue(format!("bus {}", b.id)));
            }
        }
        let mut sys = Self {
            base_mva,
            buses,
            branches: Vec::new(),
            generators: Vec::new(),
            index,
            ac: AcModel::empty(),
            dc: None,
            revisions: Revisions::default(),
        };
        for (k, br) in branches.iter().enumerate() {
            sys.check_branch(k + 1, br)?;
        }
        for (k, g) in generators.iter().enumerate() {
            sys.check_generator(k + 1, g)?;
        }
        sys.branches = branches;
        sys.generators = generators;
        sys.ac = AcModel::build(&sys)?;
        sys.dc = DcModel::build(&sys).ok();
        let now = next_stamp();
        sys.revisions = Revisions {
            ac_pattern: now,
            ac_values: now,
            dc_pattern: now,
            dc_values: now,
            injections: now,
            bus_kinds: now,
        };
        Ok(sys)
    }

    fn check_branch(&self, label: usize, br: &Branch) -> Result<(), NetworkError> {
        for b in [br.from_bus, br.to_bus] {
            if !self.index.contains_key(&b) {
                return Err(NetworkError::UnknownBus(b));
            }
        }
        if br.from_bus == br.to_bus {
            return Err(NetworkError::SelfLoop(label));
        }
        if br.turns_ratio == 0.0 || !br.turns_ratio.is_finite() {
            return Err(NetworkError::ZeroTurnsRatio(label));
        }
        if br.resistance == 0.0 && br.reactance == 0.0 {
            return Err(NetworkError::ZeroImpedance(label));
        }
        let vals = [
            br.resistance,
            br.reactance,
            br.shunt_conductance,
            br.shunt_susceptance,
            br.phase_shift,
            br.rating,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(NetworkError::InvalidValue(format!("branch {label}")));
        }
        Ok(())
    }

    fn check_generator(&self, label: usize, g: &Generator) -> Result<(), NetworkError> {
        if !self.index.contains_key(&g.bus) {
            return Err(NetworkError::UnknownBus(g.bus));
        }
        if !g.active_power.is_finite() || !g.reactive_power.is_finite() {
            return Err(NetworkError::InvalidValue(format!("generator {label}")));
        }
        if let Some(c) = &g.cost {
            c.validate()?;
        }
        Ok(())
    }

    pub fn base_mva(&self) -> f64 {
        self.base_mva
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    /// Branches in label order; branch label `k` is `branches()[k - 1]`.
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    /// Position of a bus id in [`buses`](Self::buses).
    pub fn bus_index(&self, id: BusId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn slack_index(&self) -> Result<usize, NetworkError> {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .ok_or(NetworkError::NoSlack)
    }

    /// `(from, to)` bus positions of a branch.
    pub fn branch_ends(&self, k: usize) -> (usize, usize) {
        let br = &self.branches[k];
        (self.index[&br.from_bus], self.index[&br.to_bus])
    }

    pub fn ac(&self) -> &AcModel {
        &self.ac
    }

    pub fn dc(&self) -> Result<&DcModel, NetworkError> {
        match &self.dc {
            Some(dc) => Ok(dc),
            None => Err(DcModel::build(self).err().unwrap_or(NetworkError::InvalidValue(
                "DC model unavailable".into(),
            ))),
        }
    }

    pub fn revisions(&self) -> Revisions {
        self.revisions
    }

    /// Net scheduled injection per bus: in-service generation minus load.
    pub fn scheduled_injections(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.buses.len();
        let mut p: Vec<f64> = self.buses.iter().map(|b| -b.active_load).collect();
        let mut q: Vec<f64> = self.buses.iter().map(|b| -b.reactive_load).collect();
        for g in self.generators.iter().filter(|g| g.in_service) {
            let i = self.index[&g.bus];
            p[i] += g.active_power;
            q[i] += g.reactive_power;
        }
        debug_assert_eq!(p.len(), n);
        (p, q)
    }

    /// Whether each bus has at least one in-service generator.
    pub fn has_generation(&self) -> Vec<bool> {
        let mut out = vec![false; self.buses.len()];
        for g in self.generators.iter().filter(|g| g.in_service) {
            out[self.index[&g.bus]] = true;
        }
        out
    }

    /// Flat or file voltages as complex phasors.
    pub fn initial_voltages(&self) -> Vec<Complex64> {
        self.buses
            .iter()
            .map(|b| Complex64::from_polar(b.voltage_magnitude, b.voltage_angle))
            .collect()
    }

    /// Adjacency over in-service branches (bus positions).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.buses.len()];
        for (k, br) in self.branches.iter().enumerate() {
            if br.in_service {
                let (f, t) = self.branch_ends(k);
                adj[f].push(t);
                adj[t].push(f);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    fn tick(&mut self) -> u64 {
        next_stamp()
    }

    /// Overwrites the initial bus voltages (used to store solver output).
    pub fn set_voltages(&mut self, magnitude: &[f64], angle: &[f64]) {
        for (b, (&v, &a)) in self.buses.iter_mut().zip(magnitude.iter().zip(angle)) {
            b.voltage_magnitude = v;
            b.voltage_angle = a;
        }
    }
}

/// Converts branch parameters in ohms and siemens to per-unit on the
/// secondary-side voltage base.
pub fn impedance_to_per_unit(
    r_ohm: f64,
    x_ohm: f64,
    g_siemens: f64,
    b_siemens: f64,
    base_mva: f64,
    base_kv: f64,
) -> Result<(f64, f64, f64, f64), NetworkError> {
    if !(base_mva > 0.0) || !(base_kv > 0.0) {
        return Err(NetworkError::NonPositiveBase);
    }
    let z_base = base_kv * base_kv / base_mva;
    Ok((r_ohm / z_base, x_ohm / z_base, g_siemens * z_base, b_siemens * z_base))
}
