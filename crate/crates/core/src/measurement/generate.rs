use super::{
    Coordinates, Measurement, MeasurementError, MeasurementKind, MeasurementSet, DEFAULT_LEGACY_VARIANCE,
    DEFAULT_PHASOR_VARIANCE,
};
use crate::functions::{ac_value, dc_value, AcState, Side};
use crate::network::{BusId, PowerSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Which measurements to generate and with what accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTemplate {
    /// Voltage magnitude at every bus.
    pub voltage_magnitude: bool,
    /// Flows at the from-side of every in-service branch.
    pub from_flows: bool,
    /// Probability of including each bus injection and each to-side flow.
    pub inclusion_probability: f64,
    /// Generate reactive counterparts of every active measurement.
    pub reactive: bool,
    /// Current magnitude at the from-side of every in-service branch.
    pub current_magnitude: bool,
    /// Buses with a PMU: voltage phasor plus current phasors of incident
    /// in-service branches.
    pub pmu_buses: Vec<BusId>,
    pub legacy_variance: f64,
    pub phasor_variance: f64,
    pub coordinates: Coordinates,
    pub neglect_covariance: bool,
    /// No noise; values equal the exact solution quantities.
    pub exact: bool,
}

impl Default for MeasurementTemplate {
    fn default() -> Self {
        Self {
            voltage_magnitude: true,
            from_flows: true,
            inclusion_probability: 0.5,
            reactive: true,
            current_magnitude: false,
            pmu_buses: Vec::new(),
            legacy_variance: DEFAULT_LEGACY_VARIANCE,
            phasor_variance: DEFAULT_PHASOR_VARIANCE,
            coordinates: Coordinates::Rectangular,
            neglect_covariance: true,
            exact: false,
        }
    }
}

impl MeasurementTemplate {
    /// Active-power measurements only, for the DC model.
    pub fn dc() -> Self {
        Self {
            voltage_magnitude: false,
            reactive: false,
            coordinates: Coordinates::Polar,
            ..Self::default()
        }
    }

    /// Phasors at the given buses and nothing else.
    pub fn pmu_only(buses: Vec<BusId>) -> Self {
        Self {
            voltage_magnitude: false,
            from_flows: false,
            inclusion_probability: 0.0,
            reactive: false,
            pmu_buses: buses,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Solution<'a> {
    Ac(&'a AcState),
    /// Bus angles of a DC solution.
    Dc(&'a [f64]),
}

struct Builder<'a> {
    sys: &'a PowerSystem,
    solution: Solution<'a>,
    template: &'a MeasurementTemplate,
    out: Vec<Measurement>,
}

impl Builder<'_> {
    fn push(&mut self, kind: MeasurementKind, element: usize, side: Option<Side>) -> Result<(), MeasurementError> {
        let phasor = kind.is_phasor();
        let mut m = Measurement::new(
            format!("m{}", self.out.len() + 1),
            kind,
            element,
            0.0,
            if phasor { self.template.phasor_variance } else { self.template.legacy_variance },
        );
        m.side = side;
        if phasor {
            m.coordinates = Some(self.template.coordinates);
            m.neglect_covariance = self.template.neglect_covariance;
        }
        let q = m.quantity(self.sys)?;
        m.value = match self.solution {
            Solution::Ac(s) => ac_value(self.sys, s, q),
            Solution::Dc(theta) => match kind {
                MeasurementKind::VphasorMag => 1.0,
                _ => {
                    let dc = self.sys.dc().map_err(|e| MeasurementError::Unsolved(e.to_string()))?;
                    dc_value(self.sys, dc, theta, q)
                        .ok_or_else(|| MeasurementError::Unsolved(format!("{kind} in a DC solution")))?
                }
            },
        };
        self.out.push(m);
        Ok(())
    }
}

/// Builds measurements from a solved state, `z = exact + N(0, v)` with a
/// seeded generator.
pub fn generate_from_solution(
    sys: &PowerSystem,
    solution: Solution<'_>,
    template: &MeasurementTemplate,
    seed: u64,
) -> Result<MeasurementSet, MeasurementError> {
    for v in [template.legacy_variance, template.phasor_variance] {
        if !(v > 0.0) {
            return Err(MeasurementError::NonPositiveVariance {
                id: "template".into(),
                variance: v,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder {
        sys,
        solution,
        template,
        out: Vec::new(),
    };
    let p = template.inclusion_probability.clamp(0.0, 1.0);
    let active: Vec<usize> = (0..sys.branches().len()).filter(|&k| sys.branches()[k].in_service).collect();

    if template.voltage_magnitude {
        for bus in sys.buses() {
            b.push(MeasurementKind::Vmag, bus.id, None)?;
        }
    }
    if template.from_flows {
        for &k in &active {
            b.push(MeasurementKind::Pflow, k + 1, Some(Side::From))?;
            if template.reactive {
                b.push(MeasurementKind::Qflow, k + 1, Some(Side::From))?;
            }
        }
    }
    if template.current_magnitude {
        for &k in &active {
            b.push(MeasurementKind::Imag, k + 1, Some(Side::From))?;
        }
    }
    for bus in sys.buses() {
        if rng.random_bool(p) {
            b.push(MeasurementKind::Pinj, bus.id, None)?;
            if template.reactive {
                b.push(MeasurementKind::Qinj, bus.id, None)?;
            }
        }
    }
    for &k in &active {
        if rng.random_bool(p) {
            b.push(MeasurementKind::Pflow, k + 1, Some(Side::To))?;
            if template.reactive {
                b.push(MeasurementKind::Qflow, k + 1, Some(Side::To))?;
            }
        }
    }
    for &id in &template.pmu_buses {
        let i = sys.bus_index(id).ok_or(MeasurementError::DanglingElement {
            id: "template".into(),
            element: id,
        })?;
        b.push(MeasurementKind::VphasorMag, id, None)?;
        b.push(MeasurementKind::VphasorAng, id, None)?;
        if matches!(solution, Solution::Dc(_)) {
            continue;
        }
        for &k in &active {
            let (f, t) = sys.branch_ends(k);
            let side = if f == i {
                Side::From
            } else if t == i {
                Side::To
            } else {
                continue;
            };
            b.push(MeasurementKind::IphasorMag, k + 1, Some(side))?;
            b.push(MeasurementKind::IphasorAng, k + 1, Some(side))?;
        }
    }

    let mut out = b.out;
    if !template.exact {
        for m in &mut out {
            let noise = Normal::new(0.0, m.variance.sqrt()).expect("positive variance");
            m.value += noise.sample(&mut rng);
        }
    }
    let mut set = MeasurementSet::new(out)?;
    set.seed = Some(seed);
    Ok(set)
}
