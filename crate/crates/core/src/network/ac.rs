use super::{Branch, NetworkError, PowerSystem};
use crate::sparse::{CscMatrix, PatternMap};
use num_complex::Complex64;

/// The 2×2 admittance block of one branch:
/// `[I_from; I_to] = [ff ft; tf tt] [V_from; V_to]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchBlock {
    pub ff: Complex64,
    pub ft: Complex64,
    pub tf: Complex64,
    pub tt: Complex64,
}

impl BranchBlock {
    fn as_array(&self) -> [Complex64; 4] {
        [self.ff, self.ft, self.tf, self.tt]
    }
}

/// Unified π-model block; zero for out-of-service branches.
pub fn branch_block(br: &Branch) -> BranchBlock {
    if !br.in_service {
        return BranchBlock::default();
    }
    let y = br.series_admittance();
    let half_shunt = Complex64::new(br.shunt_conductance, br.shunt_susceptance) * 0.5;
    let alpha = br.complex_ratio();
    let tau2 = br.turns_ratio * br.turns_ratio;
    BranchBlock {
        ff: (y + half_shunt) / tau2,
        ft: -alpha.conj() * y,
        tf: -alpha * y,
        tt: y + half_shunt,
    }
}

#[derive(Debug, Clone)]
pub struct AcModel {
    ybus: CscMatrix<Complex64>,
    /// Value slots of `[ff, ft, tf, tt]` for each branch.
    branch_slots: Vec<[usize; 4]>,
    diag_slots: Vec<usize>,
}

impl AcModel {
    pub(super) fn empty() -> Self {
        Self {
            ybus: CscMatrix::zeros(0, 0),
            branch_slots: Vec::new(),
            diag_slots: Vec::new(),
        }
    }

    pub(super) fn build(sys: &PowerSystem) -> Result<Self, NetworkError> {
        let n = sys.num_buses();
        let mut coords = Vec::with_capacity(n + 4 * sys.branches.len());
        for i in 0..n {
            coords.push((i, i));
        }
        for k in 0..sys.branches.len() {
            let (f, t) = sys.branch_ends(k);
            coords.extend_from_slice(&[(f, f), (f, t), (t, f), (t, t)]);
        }
        let (map, ybus) = PatternMap::build::<Complex64>(n, n, &coords)
            .map_err(|e| NetworkError::InvalidValue(e.to_string()))?;
        let diag_slots = (0..n).map(|i| map.slot(i)).collect();
        let branch_slots = (0..sys.branches.len())
            .map(|k| {
                let b = n + 4 * k;
                [map.slot(b), map.slot(b + 1), map.slot(b + 2), map.slot(b + 3)]
            })
            .collect();
        let mut model = Self {
            ybus,
            branch_slots,
            diag_slots,
        };
        for (i, bus) in sys.buses.iter().enumerate() {
            model.add_shunt(i, bus.shunt_conductance, bus.shunt_susceptance, 1.0);
        }
        for (k, br) in sys.branches.iter().enumerate() {
            model.add_branch(k, br, 1.0);
        }
        Ok(model)
    }

    pub(super) fn add_branch(&mut self, k: usize, br: &Branch, sign: f64) {
        let block = branch_block(br).as_array();
        let vals = self.ybus.values_mut();
        for (slot, v) in self.branch_slots[k].iter().zip(block) {
            vals[*slot] += v * sign;
        }
    }

    pub(super) fn add_shunt(&mut self, i: usize, g: f64, b: f64, sign: f64) {
        let slot = self.diag_slots[i];
        self.ybus.values_mut()[slot] += Complex64::new(g, b) * sign;
    }

    /// Tries to give a new branch the slots of an existing parallel branch.
    pub(super) fn reuse_slots_for(&mut self, from: usize, to: usize) -> bool {
        let (Some(ff), Some(ft), Some(tf), Some(tt)) = (
            self.ybus.position(from, from),
            self.ybus.position(from, to),
            self.ybus.position(to, from),
            self.ybus.position(to, to),
        ) else {
            return false;
        };
        self.branch_slots.push([ff, ft, tf, tt]);
        true
    }

    /// Nodal admittance matrix.
    pub fn ybus(&self) -> &CscMatrix<Complex64> {
        &self.ybus
    }

    pub fn branch_slots(&self, k: usize) -> [usize; 4] {
        self.branch_slots[k]
    }

    pub fn diagonal_slot(&self, i: usize) -> usize {
        self.diag_slots[i]
    }

    /// Injected currents `Y V`.
    pub fn currents(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.ybus.mul_vec(v)
    }

    /// Complex power injections `V ∘ conj(Y V)`.
    pub fn injections(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.currents(v).iter().zip(v).map(|(i, v)| v * i.conj()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::three_bus;
    use crate::network::{Bus, BusKind, PowerSystem};

    fn close(a: Complex64, b: Complex64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn transformer_block_by_hand() {
        let mut br = Branch::line(1, 2, 0.1, 0.2);
        br.turns_ratio = 2.0;
        // y = 1/(0.1+0.2j) = 2−4j, α = 0.5
        let b = branch_block(&br);
        assert!(close(b.ff, Complex64::new(0.5, -1.0)));
        assert!(close(b.ft, Complex64::new(-1.0, 2.0)));
        assert!(close(b.tf, Complex64::new(-1.0, 2.0)));
        assert!(close(b.tt, Complex64::new(2.0, -4.0)));
    }

    #[test]
    fn phase_shifter_off_diagonals_are_conjugate_rotations() {
        let mut br = Branch::line(1, 2, 0.1, 0.2);
        br.phase_shift = 0.1;
        let y = Complex64::new(2.0, -4.0);
        let b = branch_block(&br);
        assert!(close(b.ft, -Complex64::from_polar(1.0, 0.1) * y));
        assert!(close(b.tf, -Complex64::from_polar(1.0, -0.1) * y));
    }

    #[test]
    fn out_of_service_branch_contributes_nothing() {
        let mut br = Branch::line(1, 2, 0.1, 0.2);
        br.in_service = false;
        let sys = PowerSystem::new(
            100.0,
            vec![Bus::new(1, BusKind::Slack), Bus::new(2, BusKind::Pq)],
            vec![br],
            vec![],
        )
        .unwrap();
        assert!(sys.ac().ybus().values().iter().all(|v| v.norm() == 0.0));
        assert_eq!(sys.ac().ybus().nnz(), 4);
    }

    #[test]
    fn kirchhoff_sums_match_nodal_currents() {
        let sys = three_bus();
        let v = vec![
            Complex64::from_polar(1.02, 0.0),
            Complex64::from_polar(0.97, -0.05),
            Complex64::from_polar(1.01, 0.02),
        ];
        let nodal = sys.ac().currents(&v);
        let mut sum: Vec<Complex64> = sys
            .buses()
            .iter()
            .zip(&v)
            .map(|(b, v)| Complex64::new(b.shunt_conductance, b.shunt_susceptance) * v)
            .collect();
        for (k, br) in sys.branches().iter().enumerate() {
            let (f, t) = sys.branch_ends(k);
            let blk = branch_block(br);
            sum[f] += blk.ff * v[f] + blk.ft * v[t];
            sum[t] += blk.tf * v[f] + blk.tt * v[t];
        }
        for i in 0..3 {
            assert!(close(sum[i], nodal[i]));
        }
    }
}
