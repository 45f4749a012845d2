use super::{EstimationError, ModelKind};
use crate::functions::{ac_gradient, dc_linear, AcState, Coord, Quantity, Side};
use crate::measurement::{phasor_to_rectangular, Coordinates, MeasurementKind, MeasurementSet};
use crate::network::{branch_block, PowerSystem};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Position of each state variable in the state vector.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub kind: ModelKind,
    pub n: usize,
    pub slack: usize,
    pub slack_angle: f64,
}

impl Layout {
    pub fn new(sys: &PowerSystem, kind: ModelKind) -> Result<Self, EstimationError> {
        let slack = sys.slack_index()?;
        Ok(Self {
            kind,
            n: sys.num_buses(),
            slack,
            slack_angle: sys.buses()[slack].voltage_angle,
        })
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ModelKind::Ac => 2 * self.n - 1,
            ModelKind::Pmu => 2 * self.n,
            ModelKind::Dc => self.n - 1,
        }
    }

    pub fn angle_col(&self, i: usize) -> Option<usize> {
        use std::cmp::Ordering::*;
        match i.cmp(&self.slack) {
            Less => Some(i),
            Equal => None,
            Greater => Some(i - 1),
        }
    }

    fn coord_col(&self, c: Coord) -> Option<usize> {
        match c {
            Coord::Angle(i) => self.angle_col(i),
            Coord::Magnitude(i) => Some(self.n - 1 + i),
        }
    }

    /// Human-readable name of a state column.
    pub fn column_name(&self, sys: &PowerSystem, col: usize) -> String {
        let id = |i: usize| sys.buses()[i].id;
        let angle_bus = |c: usize| if c < self.slack { c } else { c + 1 };
        match self.kind {
            ModelKind::Ac if col < self.n - 1 => format!("angle at bus {}", id(angle_bus(col))),
            ModelKind::Ac => format!("magnitude at bus {}", id(col + 1 - self.n)),
            ModelKind::Dc => format!("angle at bus {}", id(angle_bus(col))),
            ModelKind::Pmu if col < self.n => format!("real voltage at bus {}", id(col)),
            ModelKind::Pmu => format!("imaginary voltage at bus {}", id(col - self.n)),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        match self.kind {
            ModelKind::Ac => {
                let mut x = vec![0.0; self.dim()];
                x[self.n - 1..].fill(1.0);
                x
            }
            ModelKind::Pmu => {
                let mut x = vec![0.0; self.dim()];
                x[..self.n].fill(1.0);
                x
            }
            ModelKind::Dc => vec![0.0; self.dim()],
        }
    }

    /// Bus angles (slack included) of an angle-bearing state vector.
    pub fn angles(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.angle_col(i).map_or(self.slack_angle, |c| x[c]))
            .collect()
    }

    /// Polar bus voltages described by a state vector.
    pub fn polar(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.kind {
            ModelKind::Ac => (x[self.n - 1..].to_vec(), self.angles(x)),
            ModelKind::Dc => (vec![1.0; self.n], self.angles(x)),
            ModelKind::Pmu => (0..self.n)
                .map(|i| {
                    let v = Complex64::new(x[i], x[self.n + i]);
                    (v.norm(), v.arg())
                })
                .unzip(),
        }
    }

    pub fn ac_state(&self, x: &[f64]) -> AcState {
        let (m, a) = self.polar(x);
        AcState::new(m, a)
    }

    /// State vector of an AC solution (used for warm starts and oracles).
    pub fn from_polar(&self, magnitude: &[f64], angle: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for i in 0..self.n {
            match self.kind {
                ModelKind::Ac => {
                    if let Some(c) = self.angle_col(i) {
                        x[c] = angle[i];
                    }
                    x[self.n - 1 + i] = magnitude[i];
                }
                ModelKind::Dc => {
                    if let Some(c) = self.angle_col(i) {
                        x[c] = angle[i];
                    }
                }
                ModelKind::Pmu => {
                    let v = Complex64::from_polar(magnitude[i], angle[i]);
                    x[i] = v.re;
                    x[self.n + i] = v.im;
                }
            }
        }
        x
    }
}

/// How a row's predicted value is obtained.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RowFn {
    /// A nonlinear AC quantity.
    Ac(Quantity),
    /// `|I|²` of a branch current; the row value is the squared measurement.
    SquaredCurrent(usize, Side),
    /// `Σ a_j x_j + constant` for the linear models.
    Linear { terms: Vec<(usize, f64)>, constant: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row {
    pub func: RowFn,
    pub block: usize,
    /// Angle rows have their residual wrapped to (−π, π].
    pub angular: bool,
    /// Column support, fixed when the model is built.
    pub support: Vec<usize>,
}

/// A diagonal covariance block: one scalar row or a rectangular phasor pair.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Block {
    /// Measurement positions (a phasor pair lists magnitude then angle).
    pub members: Vec<usize>,
    pub rows: Vec<usize>,
    pub z: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    /// Upper-triangular `S` with `Sᵀ S = Σ⁻¹`.
    pub sqrt_weight: [[f64; 2]; 2],
    pub active: bool,
    pub stamps: Vec<u64>,
    pub kind: BlockKind,
    /// Union of row supports, ascending.
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum BlockKind {
    Scalar,
    /// Squared current magnitude; `z` holds the squared value.
    SquaredCurrent,
    RectangularVoltage,
    RectangularCurrent,
}

impl Block {
    /// Recomputes `z`, covariance and weights from the measurement set.
    pub fn refresh(&mut self, set: &MeasurementSet) {
        let ms = set.measurements();
        self.active = self.members.iter().all(|&p| ms[p].in_service);
        self.stamps = self.members.iter().map(|&p| set.variance_stamp(p)).collect();
        let m = &ms[self.members[0]];
        match self.kind {
            BlockKind::Scalar => {
                self.z = [m.value, 0.0];
                self.covariance = [[m.variance, 0.0], [0.0, 0.0]];
            }
            BlockKind::SquaredCurrent => {
                // Exact variance of the square of a Gaussian reading.
                self.z = [m.value * m.value, 0.0];
                let v = m.variance;
                self.covariance = [[4.0 * m.value * m.value * v + 2.0 * v * v, 0.0], [0.0, 0.0]];
            }
            BlockKind::RectangularVoltage | BlockKind::RectangularCurrent => {
                let a = &ms[self.members[1]];
                let r = phasor_to_rectangular(m.value, a.value, m.variance, a.variance, m.neglect_covariance);
                self.z = [r.real, r.imag];
                self.covariance = r.covariance;
            }
        }
        self.sqrt_weight = if self.rows.len() == 1 {
            [[1.0 / self.covariance[0][0].sqrt(), 0.0], [0.0, 0.0]]
        } else {
            sqrt_inverse(self.covariance)
        };
    }

    pub fn stale(&self, set: &MeasurementSet) -> bool {
        let ms = set.measurements();
        self.active != self.members.iter().all(|&p| ms[p].in_service)
            || self.members.iter().zip(&self.stamps).any(|(&p, &s)| set.variance_stamp(p) != s)
    }

    /// Multiplies local residuals (or Jacobian columns) by `S`.
    pub fn weigh(&self, v: [f64; 2]) -> [f64; 2] {
        let s = &self.sqrt_weight;
        if self.rows.len() == 1 {
            [s[0][0] * v[0], 0.0]
        } else {
            [s[0][0] * v[0] + s[0][1] * v[1], s[1][1] * v[1]]
        }
    }
}

/// Upper-triangular `S` with `Sᵀ S = C⁻¹` for a 2×2 SPD `C`.
fn sqrt_inverse(c: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
    let w = [[c[1][1] / det, -c[0][1] / det], [-c[1][0] / det, c[0][0] / det]];
    // W = L Lᵀ (Cholesky), S = Lᵀ.
    let l00 = w[0][0].sqrt();
    let l10 = w[1][0] / l00;
    let l11 = (w[1][1] - l10 * l10).sqrt();
    [[l00, l10], [0.0, l11]]
}

/// The measurement rows of one estimation model.
#[derive(Debug, Clone)]
pub(crate) struct MeasurementModel {
    pub layout: Layout,
    pub rows: Vec<Row>,
    pub blocks: Vec<Block>,
}

impl MeasurementModel {
    pub fn build(sys: &PowerSystem, set: &MeasurementSet, kind: ModelKind) -> Result<Self, EstimationError> {
        set.validate_against(sys)?;
        let layout = Layout::new(sys, kind)?;
        let mut model = Self {
            layout,
            rows: Vec::new(),
            blocks: Vec::new(),
        };
        let pairs = set.phasor_pairs()?;
        let mut pair_of = vec![None; set.len()];
        for p in &pairs {
            pair_of[p.magnitude] = Some(p.angle);
            pair_of[p.angle] = Some(p.magnitude);
        }
        use MeasurementKind as K;
        for (pos, m) in set.measurements().iter().enumerate() {
            let q = m.quantity(sys)?;
            let rect = m.kind.is_phasor() && m.coordinates.unwrap_or(Coordinates::Rectangular) == Coordinates::Rectangular;
            match kind {
                ModelKind::Ac => match m.kind {
                    K::Imag => model.push_block(pos, BlockKind::SquaredCurrent, vec![(RowFn::SquaredCurrent(branch(q), side(q)), false)]),
                    K::VphasorMag | K::IphasorMag if rect => {
                        let angle = pair_of[pos].expect("validated pair");
                        let (kind, funcs) = match q {
                            Quantity::VoltageMagnitude(i) => (
                                BlockKind::RectangularVoltage,
                                [Quantity::VoltageReal(i), Quantity::VoltageImag(i)],
                            ),
                            _ => (
                                BlockKind::RectangularCurrent,
                                [Quantity::CurrentReal(branch(q), side(q)), Quantity::CurrentImag(branch(q), side(q))],
                            ),
                        };
                        model.push_pair(pos, angle, kind, funcs.map(RowFn::Ac));
                    }
                    K::VphasorAng | K::IphasorAng if rect => {}
                    _ => {
                        let angular = matches!(m.kind, K::VphasorAng | K::IphasorAng);
                        model.push_block(pos, BlockKind::Scalar, vec![(RowFn::Ac(q), angular)]);
                    }
                },
                ModelKind::Pmu => match m.kind {
                    K::VphasorMag | K::IphasorMag => {
                        let angle = pair_of[pos].expect("validated pair");
                        let (kind, funcs) = pmu_rows(sys, q);
                        model.push_pair(pos, angle, kind, funcs);
                    }
                    _ => {}
                },
                ModelKind::Dc => match m.kind {
                    K::Pflow | K::Pinj | K::VphasorAng => {
                        let dc = sys.dc()?;
                        let (terms, mut constant) = dc_linear(sys, dc, q).expect("active power or angle");
                        let mut cols = Vec::new();
                        for (j, a) in terms {
                            match model.layout.angle_col(j) {
                                Some(c) => cols.push((c, a)),
                                None => constant += a * model.layout.slack_angle,
                            }
                        }
                        model.push_block(pos, BlockKind::Scalar, vec![(RowFn::Linear { terms: cols, constant }, false)]);
                    }
                    _ => {}
                },
            }
        }
        for b in &mut model.blocks {
            b.refresh(set);
        }
        Ok(model)
    }

    fn push_block(&mut self, pos: usize, kind: BlockKind, funcs: Vec<(RowFn, bool)>) {
        let block = self.blocks.len();
        let mut rows = Vec::new();
        for (func, angular) in funcs {
            rows.push(self.rows.len());
            self.rows.push(Row {
                func,
                block,
                angular,
                support: Vec::new(),
            });
        }
        self.blocks.push(Block {
            members: vec![pos],
            rows,
            z: [0.0; 2],
            covariance: [[0.0; 2]; 2],
            sqrt_weight: [[0.0; 2]; 2],
            active: true,
            stamps: Vec::new(),
            kind,
            columns: Vec::new(),
        });
    }

    fn push_pair(&mut self, magnitude: usize, angle: usize, kind: BlockKind, funcs: [RowFn; 2]) {
        let [a, b] = funcs;
        self.push_block(magnitude, kind, vec![(a, false), (b, false)]);
        self.blocks.last_mut().expect("just pushed").members.push(angle);
    }

    /// Fixes row supports from the structure of the functions at `x`.
    pub fn fix_supports(&mut self, sys: &PowerSystem, x: &[f64]) {
        let state = matches!(self.layout.kind, ModelKind::Ac).then(|| self.layout.ac_state(x));
        for r in 0..self.rows.len() {
            let mut cols: Vec<usize> = match &self.rows[r].func {
                RowFn::Linear { terms, .. } => terms.iter().map(|&(c, _)| c).collect(),
                RowFn::Ac(q) => self.ac_terms(sys, state.as_ref().expect("ac state"), *q).1.into_iter().map(|(c, _)| c).collect(),
                RowFn::SquaredCurrent(k, s) => self
                    .ac_terms(sys, state.as_ref().expect("ac state"), Quantity::CurrentMagnitude(*k, *s))
                    .1
                    .into_iter()
                    .map(|(c, _)| c)
                    .collect(),
            };
            cols.sort_unstable();
            cols.dedup();
            self.rows[r].support = cols;
        }
        for b in &mut self.blocks {
            let mut cols: Vec<usize> = b.rows.iter().flat_map(|&r| self.rows[r].support.iter().copied()).collect();
            cols.sort_unstable();
            cols.dedup();
            b.columns = cols;
        }
    }

    fn ac_terms(&self, sys: &PowerSystem, s: &AcState, q: Quantity) -> (f64, Vec<(usize, f64)>) {
        let (v, grad) = ac_gradient(sys, s, q);
        (v, grad.into_iter().filter_map(|(c, d)| self.layout.coord_col(c).map(|col| (col, d))).collect())
    }

    /// Value and gradient (column, derivative; columns may repeat) of a row.
    pub fn evaluate_row(&self, sys: &PowerSystem, state: Option<&AcState>, x: &[f64], r: usize) -> (f64, Vec<(usize, f64)>) {
        match &self.rows[r].func {
            RowFn::Linear { terms, constant } => (
                terms.iter().map(|&(c, a)| a * x[c]).sum::<f64>() + constant,
                terms.clone(),
            ),
            RowFn::Ac(q) => self.ac_terms(sys, state.expect("ac state"), *q),
            RowFn::SquaredCurrent(k, s) => {
                let (m, g) = self.ac_terms(sys, state.expect("ac state"), Quantity::CurrentMagnitude(*k, *s));
                (m * m, g.into_iter().map(|(c, d)| (c, 2.0 * m * d)).collect())
            }
        }
    }

    /// Residual `z − h` of a row, angles wrapped.
    pub fn residual(&self, r: usize, h: f64) -> f64 {
        let row = &self.rows[r];
        let b = &self.blocks[row.block];
        let slot = b.rows.iter().position(|&q| q == r).expect("row in block");
        let d = b.z[slot] - h;
        if row.angular {
            wrap(d)
        } else {
            d
        }
    }

    pub fn refresh_values(&mut self, set: &MeasurementSet) -> usize {
        let mut patched = 0;
        for b in &mut self.blocks {
            if b.stale(set) {
                patched += 1;
            }
            b.refresh(set);
        }
        patched
    }

    /// Rebuilds the coefficients of linear rows after a network value change.
    pub fn refresh_linear(&mut self, sys: &PowerSystem, set: &MeasurementSet) -> Result<(), EstimationError> {
        let fresh = Self::build(sys, set, self.layout.kind)?;
        for (row, new) in self.rows.iter_mut().zip(fresh.rows) {
            row.func = new.func;
        }
        Ok(())
    }

    pub fn active_rows(&self) -> usize {
        self.blocks.iter().filter(|b| b.active).map(|b| b.rows.len()).sum()
    }
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

fn branch(q: Quantity) -> usize {
    match q {
        Quantity::CurrentMagnitude(k, _) | Quantity::CurrentAngle(k, _) | Quantity::ActiveFlow(k, _) | Quantity::ReactiveFlow(k, _) => k,
        _ => unreachable!("branch quantity expected"),
    }
}

fn side(q: Quantity) -> Side {
    match q {
        Quantity::CurrentMagnitude(_, s) | Quantity::CurrentAngle(_, s) | Quantity::ActiveFlow(_, s) | Quantity::ReactiveFlow(_, s) => s,
        _ => unreachable!("branch quantity expected"),
    }
}

/// Linear rows of a rectangular phasor in the PMU model.
fn pmu_rows(sys: &PowerSystem, q: Quantity) -> (BlockKind, [RowFn; 2]) {
    let n = sys.num_buses();
    let linear = |terms: Vec<(usize, f64)>| RowFn::Linear { terms, constant: 0.0 };
    match q {
        Quantity::VoltageMagnitude(i) => (BlockKind::RectangularVoltage, [linear(vec![(i, 1.0)]), linear(vec![(n + i, 1.0)])]),
        _ => {
            let (k, s) = (branch(q), side(q));
            let blk = branch_block(&sys.branches()[k]);
            let (f, t) = sys.branch_ends(k);
            let (a, b) = match s {
                Side::From => (blk.ff, blk.ft),
                Side::To => (blk.tf, blk.tt),
            };
            // I = a V_f + b V_t in rectangular parts.
            let re = vec![(f, a.re), (n + f, -a.im), (t, b.re), (n + t, -b.im)];
            let im = vec![(f, a.im), (n + f, a.re), (t, b.im), (n + t, b.re)];
            (BlockKind::RectangularCurrent, [linear(re), linear(im)])
        }
    }
}
