//! Measurement sets: legacy SCADA measurements and phasor (PMU) measurements,
//! their artificial generation from power-flow solutions, availability
//! randomization and in-place updates.
//!
//! Bus measurements reference a bus id. Branch measurements reference a
//! branch label (1-based position in the branch list) and a side.

mod generate;

pub use generate::{generate_from_solution, MeasurementTemplate, Solution};

use crate::functions::{Quantity, Side};
use crate::network::{next_stamp, PowerSystem};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_LEGACY_VARIANCE: f64 = 1e-4;
pub const DEFAULT_PHASOR_VARIANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    Vmag,
    Pinj,
    Qinj,
    Pflow,
    Qflow,
    Imag,
    VphasorMag,
    VphasorAng,
    IphasorMag,
    IphasorAng,
}

impl MeasurementKind {
    pub const ALL: [MeasurementKind; 10] = [
        Self::Vmag,
        Self::Pinj,
        Self::Qinj,
        Self::Pflow,
        Self::Qflow,
        Self::Imag,
        Self::VphasorMag,
        Self::VphasorAng,
        Self::IphasorMag,
        Self::IphasorAng,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Vmag => "vmag",
            Self::Pinj => "pinj",
            Self::Qinj => "qinj",
            Self::Pflow => "pflow",
            Self::Qflow => "qflow",
            Self::Imag => "imag",
            Self::VphasorMag => "vphasor_mag",
            Self::VphasorAng => "vphasor_ang",
            Self::IphasorMag => "iphasor_mag",
            Self::IphasorAng => "iphasor_ang",
        }
    }

    pub fn is_phasor(self) -> bool {
        matches!(self, Self::VphasorMag | Self::VphasorAng | Self::IphasorMag | Self::IphasorAng)
    }

    /// Branch measurements carry a side; bus measurements do not.
    pub fn is_branch(self) -> bool {
        matches!(self, Self::Pflow | Self::Qflow | Self::Imag | Self::IphasorMag | Self::IphasorAng)
    }

    /// The other half of a phasor pair.
    pub fn partner(self) -> Option<Self> {
        match self {
            Self::VphasorMag => Some(Self::VphasorAng),
            Self::VphasorAng => Some(Self::VphasorMag),
            Self::IphasorMag => Some(Self::IphasorAng),
            Self::IphasorAng => Some(Self::IphasorMag),
            _ => None,
        }
    }

    pub fn group(self) -> MeasurementGroup {
        match self {
            Self::Vmag => MeasurementGroup::VoltageMagnitude,
            Self::Imag => MeasurementGroup::CurrentMagnitude,
            Self::Pinj | Self::Pflow => MeasurementGroup::Active,
            Self::Qinj | Self::Qflow => MeasurementGroup::Reactive,
            Self::VphasorMag | Self::VphasorAng => MeasurementGroup::VoltagePhasor,
            Self::IphasorMag | Self::IphasorAng => MeasurementGroup::CurrentPhasor,
        }
    }
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasurementKind {
    type Err = MeasurementError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MeasurementError::UnknownKind(s.to_string()))
    }
}

/// Subsets used for availability control. Phasor groups count pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementGroup {
    All,
    VoltageMagnitude,
    CurrentMagnitude,
    Active,
    Reactive,
    VoltagePhasor,
    CurrentPhasor,
}

impl MeasurementGroup {
    pub fn contains(self, kind: MeasurementKind) -> bool {
        self == Self::All || kind.group() == self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinates {
    Polar,
    #[serde(rename = "rect")]
    Rectangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub id: String,
    pub kind: MeasurementKind,
    /// Bus id, or branch label for branch kinds.
    pub element: usize,
    pub side: Option<Side>,
    pub value: f64,
    pub variance: f64,
    pub in_service: bool,
    /// Phasor kinds only.
    pub coordinates: Option<Coordinates>,
    /// Rectangular phasors: drop the real/imaginary cross covariance.
    #[serde(default = "default_true")]
    pub neglect_covariance: bool,
}

fn default_true() -> bool {
    true
}

impl Measurement {
    pub fn new(id: impl Into<String>, kind: MeasurementKind, element: usize, value: f64, variance: f64) -> Self {
        Self {
            id: id.into(),
            kind,
            element,
            side: kind.is_branch().then_some(Side::From),
            value,
            variance,
            in_service: true,
            coordinates: kind.is_phasor().then_some(Coordinates::Rectangular),
            neglect_covariance: true,
        }
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = Some(side);
        self
    }

    pub fn with_coordinates(mut self, c: Coordinates) -> Self {
        self.coordinates = Some(c);
        self
    }

    /// The quantity measured, in polar form for phasors.
    pub fn quantity(&self, sys: &PowerSystem) -> Result<Quantity, MeasurementError> {
        use MeasurementKind as K;
        let dangling = || MeasurementError::DanglingElement {
            id: self.id.clone(),
            element: self.element,
        };
        if self.kind.is_branch() {
            let k = self.element.checked_sub(1).filter(|&k| k < sys.branches().len()).ok_or_else(dangling)?;
            let side = self.side.ok_or_else(|| MeasurementError::MissingSide(self.id.clone()))?;
            Ok(match self.kind {
                K::Pflow => Quantity::ActiveFlow(k, side),
                K::Qflow => Quantity::ReactiveFlow(k, side),
                K::Imag | K::IphasorMag => Quantity::CurrentMagnitude(k, side),
                _ => Quantity::CurrentAngle(k, side),
            })
        } else {
            let i = sys.bus_index(self.element).ok_or_else(dangling)?;
            Ok(match self.kind {
                K::Vmag | K::VphasorMag => Quantity::VoltageMagnitude(i),
                K::VphasorAng => Quantity::VoltageAngle(i),
                K::Pinj => Quantity::ActiveInjection(i),
                _ => Quantity::ReactiveInjection(i),
            })
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error("unknown measurement kind '{0}'")]
    UnknownKind(String),
    #[error("unknown measurement id '{0}'")]
    UnknownId(String),
    #[error("duplicate measurement id '{0}'")]
    DuplicateId(String),
    #[error("measurement '{id}' has non-positive variance {variance}")]
    NonPositiveVariance { id: String, variance: f64 },
    #[error("measurement '{id}' references missing element {element}")]
    DanglingElement { id: String, element: usize },
    #[error("branch measurement '{0}' has no side")]
    MissingSide(String),
    #[error("phasor measurement '{0}' has no matching magnitude/angle partner")]
    UnpairedPhasor(String),
    #[error("phasor measurement '{0}' disagrees with its partner on coordinates")]
    CoordinateMismatch(String),
    #[error("cannot put {requested} of {available} measurement units in service")]
    InfeasibleCount { requested: usize, available: usize },
    #[error("solution does not provide {0}")]
    Unsolved(String),
}

/// Stamps for cache invalidation in estimators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MeasurementRevisions {
    /// Row set, kinds, elements or coordinates changed.
    pub structure: u64,
    pub values: u64,
    pub variances: u64,
    pub status: u64,
}

/// A phasor as the positions of its magnitude and angle rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhasorPair {
    pub magnitude: usize,
    pub angle: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementUpdate {
    pub value: Option<f64>,
    pub variance: Option<f64>,
    pub in_service: Option<bool>,
}

/// How many units of a group to keep in service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvailabilityPolicy {
    pub group: MeasurementGroup,
    pub in_service: usize,
}

#[derive(Debug, Clone)]
pub struct MeasurementSet {
    measurements: Vec<Measurement>,
    index: HashMap<String, usize>,
    /// Per-measurement stamp of the last variance change.
    variance_stamps: Vec<u64>,
    pub seed: Option<u64>,
    revisions: MeasurementRevisions,
}

impl PartialEq for MeasurementSet {
    fn eq(&self, other: &Self) -> bool {
        self.measurements == other.measurements && self.seed == other.seed
    }
}

fn validate_one(m: &Measurement) -> Result<(), MeasurementError> {
    if !(m.variance > 0.0) || !m.variance.is_finite() {
        return Err(MeasurementError::NonPositiveVariance {
            id: m.id.clone(),
            variance: m.variance,
        });
    }
    if m.kind.is_branch() && m.side.is_none() {
        return Err(MeasurementError::MissingSide(m.id.clone()));
    }
    Ok(())
}

impl MeasurementSet {
    pub fn new(measurements: Vec<Measurement>) -> Result<Self, MeasurementError> {
        let mut index = HashMap::with_capacity(measurements.len());
        for (k, m) in measurements.iter().enumerate() {
            validate_one(m)?;
            if index.insert(m.id.clone(), k).is_some() {
                return Err(MeasurementError::DuplicateId(m.id.clone()));
            }
        }
        let stamp = next_stamp();
        let set = Self {
            variance_stamps: vec![stamp; measurements.len()],
            measurements,
            index,
            seed: None,
            revisions: MeasurementRevisions {
                structure: stamp,
                values: stamp,
                variances: stamp,
                status: stamp,
            },
        };
        set.phasor_pairs()?;
        Ok(set)
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Measurement> {
        self.index.get(id).map(|&k| &self.measurements[k])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn revisions(&self) -> MeasurementRevisions {
        self.revisions
    }

    pub fn variance_stamp(&self, position: usize) -> u64 {
        self.variance_stamps[position]
    }

    pub fn by_kind(&self, kind: MeasurementKind) -> impl Iterator<Item = (usize, &Measurement)> {
        self.measurements.iter().enumerate().filter(move |(_, m)| m.kind == kind)
    }

    pub fn by_element(&self, kind: MeasurementKind, element: usize) -> impl Iterator<Item = (usize, &Measurement)> {
        self.by_kind(kind).filter(move |(_, m)| m.element == element)
    }

    /// Checks every element reference against a network.
    pub fn validate_against(&self, sys: &PowerSystem) -> Result<(), MeasurementError> {
        for m in &self.measurements {
            m.quantity(sys)?;
        }
        Ok(())
    }

    /// Pairs phasor magnitude and angle rows sharing kind family, element and
    /// side, ordered by the magnitude row.
    pub fn phasor_pairs(&self) -> Result<Vec<PhasorPair>, MeasurementError> {
        let mut open: HashMap<(MeasurementKind, usize, Option<Side>), usize> = HashMap::new();
        let mut pairs = Vec::new();
        for (k, m) in self.measurements.iter().enumerate() {
            let Some(partner) = m.kind.partner() else { continue };
            if let Some(j) = open.remove(&(partner, m.element, m.side)) {
                let other = &self.measurements[j];
                if other.coordinates != m.coordinates || other.neglect_covariance != m.neglect_covariance {
                    return Err(MeasurementError::CoordinateMismatch(m.id.clone()));
                }
                let (magnitude, angle) = if matches!(m.kind, MeasurementKind::VphasorMag | MeasurementKind::IphasorMag) {
                    (k, j)
                } else {
                    (j, k)
                };
                pairs.push(PhasorPair { magnitude, angle });
            } else if open.insert((m.kind, m.element, m.side), k).is_some() {
                return Err(MeasurementError::UnpairedPhasor(m.id.clone()));
            }
        }
        if let Some(&k) = open.values().min() {
            return Err(MeasurementError::UnpairedPhasor(self.measurements[k].id.clone()));
        }
        pairs.sort_by_key(|p| p.magnitude.min(p.angle));
        Ok(pairs)
    }

    /// Partner row of a phasor measurement.
    pub fn partner_of(&self, position: usize) -> Option<usize> {
        let m = &self.measurements[position];
        let partner = m.kind.partner()?;
        self.measurements
            .iter()
            .position(|o| o.kind == partner && o.element == m.element && o.side == m.side)
    }

    pub fn push(&mut self, m: Measurement) -> Result<(), MeasurementError> {
        validate_one(&m)?;
        if self.index.contains_key(&m.id) {
            return Err(MeasurementError::DuplicateId(m.id));
        }
        self.index.insert(m.id.clone(), self.measurements.len());
        self.measurements.push(m);
        let stamp = next_stamp();
        self.variance_stamps.push(stamp);
        self.revisions.structure = stamp;
        Ok(())
    }

    pub fn update(&mut self, id: &str, change: &MeasurementUpdate) -> Result<(), MeasurementError> {
        let k = self.position(id).ok_or_else(|| MeasurementError::UnknownId(id.to_string()))?;
        if let Some(v) = change.variance {
            if !(v > 0.0) || !v.is_finite() {
                return Err(MeasurementError::NonPositiveVariance {
                    id: id.to_string(),
                    variance: v,
                });
            }
        }
        let stamp = next_stamp();
        let m = &mut self.measurements[k];
        if let Some(v) = change.value {
            m.value = v;
            self.revisions.values = stamp;
        }
        if let Some(v) = change.variance {
            m.variance = v;
            self.variance_stamps[k] = stamp;
            self.revisions.variances = stamp;
        }
        if let Some(s) = change.in_service {
            m.in_service = s;
            self.revisions.status = stamp;
        }
        Ok(())
    }

    pub fn set_status(&mut self, position: usize, in_service: bool) {
        if self.measurements[position].in_service != in_service {
            self.measurements[position].in_service = in_service;
            self.revisions.status = next_stamp();
        }
    }

    /// Units (single rows or phasor pairs) of a group, by row positions.
    fn units(&self, group: MeasurementGroup) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for (k, m) in self.measurements.iter().enumerate() {
            if seen[k] || !group.contains(m.kind) {
                continue;
            }
            seen[k] = true;
            let mut unit = vec![k];
            if let Some(j) = self.partner_of(k) {
                seen[j] = true;
                unit.push(j);
            }
            out.push(unit);
        }
        out
    }

    /// Puts exactly the requested number of units of each group in service,
    /// chosen uniformly; the rest of each group goes out of service.
    pub fn randomize_availability(&mut self, policies: &[AvailabilityPolicy], seed: u64) -> Result<(), MeasurementError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in policies {
            let units = self.units(p.group);
            if p.in_service > units.len() {
                return Err(MeasurementError::InfeasibleCount {
                    requested: p.in_service,
                    available: units.len(),
                });
            }
            let mut keep = vec![false; units.len()];
            for u in sample(&mut rng, units.len(), p.in_service) {
                keep[u] = true;
            }
            for (unit, on) in units.iter().zip(keep) {
                for &k in unit {
                    self.measurements[k].in_service = on;
                }
            }
        }
        self.revisions.status = next_stamp();
        Ok(())
    }
}

/// Rectangular form of a polar phasor with first-order covariance
/// propagation. Within one standard deviation of zero magnitude the angle
/// carries no information and the error is taken as isotropic, which keeps
/// the covariance positive definite for dead branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectangularPhasor {
    pub real: f64,
    pub imag: f64,
    /// `[[var(re), cov], [cov, var(im)]]`.
    pub covariance: [[f64; 2]; 2],
}

pub fn phasor_to_rectangular(
    magnitude: f64,
    angle: f64,
    magnitude_variance: f64,
    angle_variance: f64,
    neglect_covariance: bool,
) -> RectangularPhasor {
    let (s, c) = angle.sin_cos();
    let m2 = magnitude * magnitude;
    if m2 <= magnitude_variance {
        return RectangularPhasor {
            real: magnitude * c,
            imag: magnitude * s,
            covariance: [[magnitude_variance, 0.0], [0.0, magnitude_variance]],
        };
    }
    let var_re = c * c * magnitude_variance + m2 * s * s * angle_variance;
    let var_im = s * s * magnitude_variance + m2 * c * c * angle_variance;
    let cov = if neglect_covariance {
        0.0
    } else {
        s * c * (magnitude_variance - m2 * angle_variance)
    };
    RectangularPhasor {
        real: magnitude * c,
        imag: magnitude * s,
        covariance: [[var_re, cov], [cov, var_im]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(id: usize, bus: usize) -> [Measurement; 2] {
        [
            Measurement::new(format!("m{id}"), MeasurementKind::VphasorMag, bus, 1.0, 1e-6),
            Measurement::new(format!("m{}", id + 1), MeasurementKind::VphasorAng, bus, 0.0, 1e-6),
        ]
    }

    #[test]
    fn zero_phasor_has_isotropic_covariance() {
        let r = phasor_to_rectangular(0.0, 0.0, 1e-6, 1e-6, true);
        assert_eq!(r.covariance, [[1e-6, 0.0], [0.0, 1e-6]]);
    }

    #[test]
    fn axis_aligned_phasor() {
        let r = phasor_to_rectangular(1.2, 0.0, 1e-4, 1e-6, false);
        assert_eq!(r.real, 1.2);
        assert_eq!(r.imag, 0.0);
        assert!((r.covariance[0][0] - 1e-4).abs() < 1e-18);
        assert!((r.covariance[1][1] - 1.44e-6).abs() < 1e-18);
        assert!(r.covariance[0][1].abs() < 1e-18);
    }

    #[test]
    fn quarter_turn_swaps_variances() {
        let r = phasor_to_rectangular(1.0, std::f64::consts::FRAC_PI_2, 1e-4, 1e-6, false);
        assert!((r.covariance[0][0] - 1e-6).abs() < 1e-15);
        assert!((r.covariance[1][1] - 1e-4).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn covariance_is_positive_definite(m in 0.1f64..2.0, a in -3.2f64..3.2, vm in 1e-8f64..1e-2, va in 1e-8f64..1e-2) {
            let c = phasor_to_rectangular(m, a, vm, va, false).covariance;
            prop_assert_eq!(c[0][1], c[1][0]);
            prop_assert!(c[0][0] > 0.0);
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            prop_assert!(det > 0.0);
            // Determinant is preserved by the rotation: m² vm va.
            prop_assert!((det - m * m * vm * va).abs() <= 1e-9 * det.max(1e-30) + 1e-24);
        }
    }

    #[test]
    fn rejects_bad_variance_and_duplicates() {
        let bad = Measurement::new("a", MeasurementKind::Vmag, 1, 1.0, 0.0);
        assert!(matches!(MeasurementSet::new(vec![bad]), Err(MeasurementError::NonPositiveVariance { .. })));
        let a = Measurement::new("a", MeasurementKind::Vmag, 1, 1.0, 1e-4);
        assert!(matches!(
            MeasurementSet::new(vec![a.clone(), a]),
            Err(MeasurementError::DuplicateId(_))
        ));
    }

    #[test]
    fn unpaired_phasor_is_rejected() {
        let [m, _] = pair(1, 1);
        assert!(matches!(MeasurementSet::new(vec![m]), Err(MeasurementError::UnpairedPhasor(_))));
        let [m, mut a] = pair(1, 1);
        a.coordinates = Some(Coordinates::Polar);
        assert!(matches!(MeasurementSet::new(vec![m, a]), Err(MeasurementError::CoordinateMismatch(_))));
    }

    #[test]
    fn availability_counts_are_exact() {
        let mut ms = Vec::new();
        for i in 0..6 {
            ms.push(Measurement::new(format!("p{i}"), MeasurementKind::Pinj, i + 1, 0.0, 1e-4));
            ms.push(Measurement::new(format!("v{i}"), MeasurementKind::Vmag, i + 1, 1.0, 1e-4));
        }
        for (k, b) in [(100, 1), (102, 2), (104, 3)] {
            ms.extend(pair(k, b));
        }
        let mut set = MeasurementSet::new(ms).unwrap();
        set.randomize_availability(
            &[
                AvailabilityPolicy {
                    group: MeasurementGroup::Active,
                    in_service: 4,
                },
                AvailabilityPolicy {
                    group: MeasurementGroup::VoltagePhasor,
                    in_service: 1,
                },
            ],
            3,
        )
        .unwrap();
        let on = |k: MeasurementKind| set.by_kind(k).filter(|(_, m)| m.in_service).count();
        assert_eq!(on(MeasurementKind::Pinj), 4);
        assert_eq!(on(MeasurementKind::Vmag), 6);
        assert_eq!(on(MeasurementKind::VphasorMag), 1);
        assert_eq!(on(MeasurementKind::VphasorAng), 1);
        for p in set.phasor_pairs().unwrap() {
            assert_eq!(set.measurements()[p.magnitude].in_service, set.measurements()[p.angle].in_service);
        }
        let err = set.randomize_availability(
            &[AvailabilityPolicy {
                group: MeasurementGroup::Active,
                in_service: 7,
            }],
            1,
        );
        assert!(matches!(err, Err(MeasurementError::InfeasibleCount { .. })));
    }

    #[test]
    fn different_seeds_usually_pick_different_subsets() {
        let ms: Vec<_> = (0..30)
            .map(|i| Measurement::new(format!("p{i}"), MeasurementKind::Pinj, i + 1, 0.0, 1e-4))
            .collect();
        let base = MeasurementSet::new(ms).unwrap();
        let policy = [AvailabilityPolicy {
            group: MeasurementGroup::All,
            in_service: 15,
        }];
        let status = |seed| {
            let mut s = base.clone();
            s.randomize_availability(&policy, seed).unwrap();
            s.measurements().iter().map(|m| m.in_service).collect::<Vec<_>>()
        };
        let distinct = (0..20).filter(|&t| status(2 * t) != status(2 * t + 1)).count();
        assert!(distinct >= 19);
    }

    #[test]
    fn variance_update_touches_only_that_row() {
        let [m, a] = pair(1, 1);
        let mut set = MeasurementSet::new(vec![m, a, Measurement::new("x", MeasurementKind::Vmag, 1, 1.0, 1e-4)]).unwrap();
        let before: Vec<u64> = (0..3).map(|k| set.variance_stamp(k)).collect();
        let revs = set.revisions();
        set.update(
            "m2",
            &MeasurementUpdate {
                variance: Some(4e-6),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(set.variance_stamp(0), before[0]);
        assert_ne!(set.variance_stamp(1), before[1]);
        assert_eq!(set.variance_stamp(2), before[2]);
        assert_eq!(set.revisions().structure, revs.structure);
        assert!(set.update("nope", &MeasurementUpdate::default()).is_err());
    }
}
