//! Values and analytic gradients of AC and DC network quantities in polar
//! bus-voltage coordinates.
//!
//! Every complex quantity is built as a value plus its partial derivatives
//! with respect to bus angles and magnitudes (`∂V̄/∂θ = jV̄`,
//! `∂V̄/∂V = e^{jθ}`); real quantities are then the real part, imaginary
//! part, modulus or argument of those.

use crate::network::{branch_block, DcModel, PowerSystem};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    From,
    To,
}

/// A state coordinate: angle or magnitude of the bus at a position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    Angle(usize),
    Magnitude(usize),
}

/// A scalar network quantity. Bus fields are positions, branch fields are
/// 0-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quantity {
    VoltageMagnitude(usize),
    VoltageAngle(usize),
    VoltageReal(usize),
    VoltageImag(usize),
    ActiveInjection(usize),
    ReactiveInjection(usize),
    ActiveFlow(usize, Side),
    ReactiveFlow(usize, Side),
    CurrentMagnitude(usize, Side),
    CurrentAngle(usize, Side),
    CurrentReal(usize, Side),
    CurrentImag(usize, Side),
}

/// Bus voltages in polar form with cached phasors.
#[derive(Debug, Clone, PartialEq)]
pub struct AcState {
    pub magnitude: Vec<f64>,
    pub angle: Vec<f64>,
    phasor: Vec<Complex64>,
    unit: Vec<Complex64>,
}

impl AcState {
    pub fn new(magnitude: Vec<f64>, angle: Vec<f64>) -> Self {
        assert_eq!(magnitude.len(), angle.len());
        let unit: Vec<Complex64> = angle.iter().map(|&a| Complex64::from_polar(1.0, a)).collect();
        let phasor = unit.iter().zip(&magnitude).map(|(u, &m)| u * m).collect();
        Self {
            magnitude,
            angle,
            phasor,
            unit,
        }
    }

    pub fn flat(n: usize) -> Self {
        Self::new(vec![1.0; n], vec![0.0; n])
    }

    pub fn from_phasors(v: &[Complex64]) -> Self {
        Self::new(v.iter().map(|c| c.norm()).collect(), v.iter().map(|c| c.arg()).collect())
    }

    pub fn phasors(&self) -> &[Complex64] {
        &self.phasor
    }

    pub fn len(&self) -> usize {
        self.magnitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitude.is_empty()
    }
}

/// A complex quantity and its partials.
#[derive(Debug, Clone, Default)]
struct ComplexGrad {
    value: Complex64,
    terms: Vec<(Coord, Complex64)>,
}

impl ComplexGrad {
    fn voltage(s: &AcState, i: usize) -> Self {
        Self {
            value: s.phasor[i],
            terms: vec![
                (Coord::Angle(i), Complex64::i() * s.phasor[i]),
                (Coord::Magnitude(i), s.unit[i]),
            ],
        }
    }

    fn scaled_voltage(s: &AcState, i: usize, c: Complex64, out: &mut Self) {
        out.value += c * s.phasor[i];
        out.terms.push((Coord::Angle(i), c * Complex64::i() * s.phasor[i]));
        out.terms.push((Coord::Magnitude(i), c * s.unit[i]));
    }

    /// `V̄_i · conj(self)`.
    fn power_at(self, s: &AcState, i: usize) -> Self {
        let v = s.phasor[i];
        let mut terms: Vec<(Coord, Complex64)> = self.terms.iter().map(|&(c, d)| (c, v * d.conj())).collect();
        let ic = self.value.conj();
        terms.push((Coord::Angle(i), Complex64::i() * v * ic));
        terms.push((Coord::Magnitude(i), s.unit[i] * ic));
        Self {
            value: v * ic,
            terms,
        }
    }

    fn real(&self) -> (f64, Vec<(Coord, f64)>) {
        (self.value.re, self.terms.iter().map(|&(c, d)| (c, d.re)).collect())
    }

    fn imag(&self) -> (f64, Vec<(Coord, f64)>) {
        (self.value.im, self.terms.iter().map(|&(c, d)| (c, d.im)).collect())
    }

    fn modulus(&self) -> (f64, Vec<(Coord, f64)>) {
        let m = self.value.norm();
        if m == 0.0 {
            return (0.0, self.terms.iter().map(|&(c, _)| (c, 0.0)).collect());
        }
        let u = self.value.conj() / m;
        (m, self.terms.iter().map(|&(c, d)| (c, (u * d).re)).collect())
    }

    fn argument(&self) -> (f64, Vec<(Coord, f64)>) {
        let m2 = self.value.norm_sqr();
        if m2 == 0.0 {
            return (0.0, self.terms.iter().map(|&(c, _)| (c, 0.0)).collect());
        }
        let (a, b) = (self.value.re, self.value.im);
        (
            b.atan2(a),
            self.terms.iter().map(|&(c, d)| (c, (a * d.im - b * d.re) / m2)).collect(),
        )
    }
}

fn branch_current(sys: &PowerSystem, s: &AcState, k: usize, side: Side) -> ComplexGrad {
    let blk = branch_block(&sys.branches()[k]);
    let (f, t) = sys.branch_ends(k);
    let mut g = ComplexGrad::default();
    match side {
        Side::From => {
            ComplexGrad::scaled_voltage(s, f, blk.ff, &mut g);
            ComplexGrad::scaled_voltage(s, t, blk.ft, &mut g);
        }
        Side::To => {
            ComplexGrad::scaled_voltage(s, f, blk.tf, &mut g);
            ComplexGrad::scaled_voltage(s, t, blk.tt, &mut g);
        }
    }
    g
}

fn bus_current(sys: &PowerSystem, s: &AcState, i: usize) -> ComplexGrad {
    // Y is structurally symmetric: the pattern of column i is that of row i.
    let y = sys.ac().ybus();
    let mut g = ComplexGrad::default();
    let (rows, _) = y.col(i);
    for &j in rows {
        let yij = y.get(i, j);
        ComplexGrad::scaled_voltage(s, j, yij, &mut g);
    }
    g
}

fn branch_end(sys: &PowerSystem, k: usize, side: Side) -> usize {
    let (f, t) = sys.branch_ends(k);
    match side {
        Side::From => f,
        Side::To => t,
    }
}

/// Value and sparse gradient of a quantity. Gradient entries may repeat a
/// coordinate; callers sum them.
pub fn ac_gradient(sys: &PowerSystem, s: &AcState, q: Quantity) -> (f64, Vec<(Coord, f64)>) {
    match q {
        Quantity::VoltageMagnitude(i) => (s.magnitude[i], vec![(Coord::Magnitude(i), 1.0)]),
        Quantity::VoltageAngle(i) => (s.angle[i], vec![(Coord::Angle(i), 1.0)]),
        Quantity::VoltageReal(i) => ComplexGrad::voltage(s, i).real(),
        Quantity::VoltageImag(i) => ComplexGrad::voltage(s, i).imag(),
        Quantity::ActiveInjection(i) => bus_current(sys, s, i).power_at(s, i).real(),
        Quantity::ReactiveInjection(i) => bus_current(sys, s, i).power_at(s, i).imag(),
        Quantity::ActiveFlow(k, side) => branch_current(sys, s, k, side)
            .power_at(s, branch_end(sys, k, side))
            .real(),
        Quantity::ReactiveFlow(k, side) => branch_current(sys, s, k, side)
            .power_at(s, branch_end(sys, k, side))
            .imag(),
        Quantity::CurrentMagnitude(k, side) => branch_current(sys, s, k, side).modulus(),
        Quantity::CurrentAngle(k, side) => branch_current(sys, s, k, side).argument(),
        Quantity::CurrentReal(k, side) => branch_current(sys, s, k, side).real(),
        Quantity::CurrentImag(k, side) => branch_current(sys, s, k, side).imag(),
    }
}

/// Value of a quantity.
pub fn ac_value(sys: &PowerSystem, s: &AcState, q: Quantity) -> f64 {
    let v = &s.phasor;
    let current = |k: usize, side: Side| {
        let blk = branch_block(&sys.branches()[k]);
        let (f, t) = sys.branch_ends(k);
        match side {
            Side::From => blk.ff * v[f] + blk.ft * v[t],
            Side::To => blk.tf * v[f] + blk.tt * v[t],
        }
    };
    match q {
        Quantity::VoltageMagnitude(i) => s.magnitude[i],
        Quantity::VoltageAngle(i) => s.angle[i],
        Quantity::VoltageReal(i) => v[i].re,
        Quantity::VoltageImag(i) => v[i].im,
        Quantity::ActiveInjection(i) | Quantity::ReactiveInjection(i) => {
            let y = sys.ac().ybus();
            let (rows, _) = y.col(i);
            let cur: Complex64 = rows.iter().map(|&j| y.get(i, j) * v[j]).sum();
            let p = v[i] * cur.conj();
            if matches!(q, Quantity::ActiveInjection(_)) {
                p.re
            } else {
                p.im
            }
        }
        Quantity::ActiveFlow(k, side) | Quantity::ReactiveFlow(k, side) => {
            let p = v[branch_end(sys, k, side)] * current(k, side).conj();
            if matches!(q, Quantity::ActiveFlow(..)) {
                p.re
            } else {
                p.im
            }
        }
        Quantity::CurrentMagnitude(k, side) => current(k, side).norm(),
        Quantity::CurrentAngle(k, side) => {
            let c = current(k, side);
            if c == Complex64::new(0.0, 0.0) {
                0.0
            } else {
                c.arg()
            }
        }
        Quantity::CurrentReal(k, side) => current(k, side).re,
        Quantity::CurrentImag(k, side) => current(k, side).im,
    }
}

/// Linear DC form of a quantity: `(Σ coef·θ_bus, constant)`, or `None` for
/// quantities the DC model does not describe.
pub fn dc_linear(sys: &PowerSystem, dc: &DcModel, q: Quantity) -> Option<(Vec<(usize, f64)>, f64)> {
    match q {
        Quantity::ActiveInjection(i) => {
            let b = dc.bmatrix();
            let (rows, _) = b.col(i);
            let terms = rows.iter().map(|&j| (j, b.get(i, j))).collect();
            Some((terms, dc.shift_injection()[i] + dc.shunt_injection()[i]))
        }
        Quantity::ActiveFlow(k, side) => {
            let br = &sys.branches()[k];
            let b = crate::network::branch_susceptance(br);
            let (f, t) = sys.branch_ends(k);
            let sign = if side == Side::From { 1.0 } else { -1.0 };
            Some((vec![(f, sign * b), (t, -sign * b)], -sign * b * br.phase_shift))
        }
        Quantity::VoltageAngle(i) => Some((vec![(i, 1.0)], 0.0)),
        _ => None,
    }
}

pub fn dc_value(sys: &PowerSystem, dc: &DcModel, theta: &[f64], q: Quantity) -> Option<f64> {
    dc_linear(sys, dc, q).map(|(terms, c)| terms.iter().map(|&(j, a)| a * theta[j]).sum::<f64>() + c)
}
