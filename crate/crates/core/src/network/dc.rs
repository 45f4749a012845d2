use super::{Branch, NetworkError, PowerSystem};
use crate::sparse::{CscMatrix, PatternMap};

/// `1/(τ x)` for an in-service branch, 0 otherwise.
pub fn branch_susceptance(br: &Branch) -> f64 {
    if br.in_service {
        1.0 / (br.turns_ratio * br.reactance)
    } else {
        0.0
    }
}

/// Linearized active-power model: injections are `B θ + shift + shunt`.
#[derive(Debug, Clone)]
pub struct DcModel {
    bmatrix: CscMatrix<f64>,
    branch_slots: Vec<[usize; 4]>,
    shift: Vec<f64>,
    shunt: Vec<f64>,
}

impl DcModel {
    pub(super) fn build(sys: &PowerSystem) -> Result<Self, NetworkError> {
        let n = sys.num_buses();
        for (k, br) in sys.branches.iter().enumerate() {
            if br.in_service && br.reactance == 0.0 {
                return Err(NetworkError::ZeroReactance(k + 1));
            }
        }
        let mut coords = Vec::with_capacity(n + 4 * sys.branches.len());
        for i in 0..n {
            coords.push((i, i));
        }
        for k in 0..sys.branches.len() {
            let (f, t) = sys.branch_ends(k);
            coords.extend_from_slice(&[(f, f), (f, t), (t, f), (t, t)]);
        }
        let (map, bmatrix) =
            PatternMap::build::<f64>(n, n, &coords).map_err(|e| NetworkError::InvalidValue(e.to_string()))?;
        let branch_slots = (0..sys.branches.len())
            .map(|k| {
                let b = n + 4 * k;
                [map.slot(b), map.slot(b + 1), map.slot(b + 2), map.slot(b + 3)]
            })
            .collect();
        let mut model = Self {
            bmatrix,
            branch_slots,
            shift: vec![0.0; n],
            shunt: sys.buses.iter().map(|b| b.shunt_conductance).collect(),
        };
        for (k, br) in sys.branches.iter().enumerate() {
            let (f, t) = sys.branch_ends(k);
            model.add_branch(k, f, t, br, 1.0);
        }
        Ok(model)
    }

    pub(super) fn add_branch(&mut self, k: usize, f: usize, t: usize, br: &Branch, sign: f64) {
        let b = branch_susceptance(br) * sign;
        let vals = self.bmatrix.values_mut();
        let [ff, ft, tf, tt] = self.branch_slots[k];
        vals[ff] += b;
        vals[ft] -= b;
        vals[tf] -= b;
        vals[tt] += b;
        let (shift, shunt_from, shunt_to) = Self::constant_terms(br);
        self.shift[f] -= shift * sign;
        self.shift[t] += shift * sign;
        self.shunt[f] += shunt_from * sign;
        self.shunt[t] += shunt_to * sign;
    }

    /// `(φ/(τx), from-side shunt, to-side shunt)` active-power constants of a
    /// branch. Shunt conductance halves are taken at unit voltage.
    pub(super) fn constant_terms(br: &Branch) -> (f64, f64, f64) {
        if !br.in_service {
            return (0.0, 0.0, 0.0);
        }
        let g = 0.5 * br.shunt_conductance;
        (
            br.phase_shift * branch_susceptance(br),
            g / (br.turns_ratio * br.turns_ratio),
            g,
        )
    }

    pub(super) fn add_bus_shunt(&mut self, i: usize, g: f64) {
        self.shunt[i] += g;
    }

    pub(super) fn reuse_slots_for(&mut self, from: usize, to: usize) -> bool {
        let m = &self.bmatrix;
        let (Some(ff), Some(ft), Some(tf), Some(tt)) =
            (m.position(from, from), m.position(from, to), m.position(to, from), m.position(to, to))
        else {
            return false;
        };
        self.branch_slots.push([ff, ft, tf, tt]);
        true
    }

    pub fn bmatrix(&self) -> &CscMatrix<f64> {
        &self.bmatrix
    }

    /// Per-bus injection from phase shifters, `Σ ∓φ/(τx)`.
    pub fn shift_injection(&self) -> &[f64] {
        &self.shift
    }

    /// Per-bus active power consumed by shunt conductances.
    pub fn shunt_injection(&self) -> &[f64] {
        &self.shunt
    }

    /// Constant term of the nodal injections, `shift + shunt`.
    pub fn constant_injection(&self) -> Vec<f64> {
        self.shift.iter().zip(&self.shunt).map(|(a, b)| a + b).collect()
    }

    /// `(P_from, P_to)` of a branch at the given angles.
    pub fn branch_flow(br: &Branch, theta_from: f64, theta_to: f64) -> (f64, f64) {
        let b = branch_susceptance(br);
        let p = b * (theta_from - theta_to) - b * br.phase_shift;
        (p, -p)
    }

    pub fn injections(&self, theta: &[f64]) -> Vec<f64> {
        let mut p = self.bmatrix.mul_vec(theta);
        for i in 0..p.len() {
            p[i] += self.shift[i] + self.shunt[i];
        }
        p
    }
}
