use super::{
    finish_report, initial_state, max_mismatch, power_mismatch, BusSets, DivergenceGuard, Method, PowerFlowError,
    PowerFlowOptions, PowerFlowReport, ReuseEvents, Start, Submatrix,
};
use crate::functions::AcState;
use crate::network::{branch_block, Branch, PowerSystem};
use crate::sparse::{CscMatrix, LuFactorization, PatternMap, SparseError};
use serde::{Deserialize, Serialize};

/// Which matrix drops series resistance.
///
/// | matrix | shunts | taps | shifts | resistance (XB) | resistance (BX) |
/// |--------|--------|------|--------|-----------------|-----------------|
/// | `B′`   | no     | 1    | kept   | dropped         | kept            |
/// | `B″`   | kept   | kept | 0      | kept            | dropped         |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FastDecoupledVariant {
    Xb,
    Bx,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Which {
    Prime,
    DoublePrime,
}

fn modified_branch(br: &Branch, which: Which, variant: FastDecoupledVariant) -> Branch {
    let mut b = br.clone();
    match which {
        Which::Prime => {
            b.shunt_conductance = 0.0;
            b.shunt_susceptance = 0.0;
            b.turns_ratio = 1.0;
            if variant == FastDecoupledVariant::Xb {
                b.resistance = 0.0;
            }
        }
        Which::DoublePrime => {
            b.phase_shift = 0.0;
            if variant == FastDecoupledVariant::Bx {
                b.resistance = 0.0;
            }
        }
    }
    b
}

/// `−Im(Y)` of the modified network on the full bus set.
fn susceptance_matrix(sys: &PowerSystem, which: Which, variant: FastDecoupledVariant) -> Result<CscMatrix<f64>, SparseError> {
    let n = sys.num_buses();
    let mut coords = Vec::with_capacity(n + 4 * sys.branches().len());
    let mut vals = Vec::with_capacity(coords.capacity());
    for (i, bus) in sys.buses().iter().enumerate() {
        coords.push((i, i));
        vals.push(if which == Which::DoublePrime { -bus.shunt_susceptance } else { 0.0 });
    }
    for (k, br) in sys.branches().iter().enumerate() {
        let (f, t) = sys.branch_ends(k);
        let blk = branch_block(&modified_branch(br, which, variant));
        coords.extend_from_slice(&[(f, f), (f, t), (t, f), (t, t)]);
        vals.extend_from_slice(&[-blk.ff.im, -blk.ft.im, -blk.tf.im, -blk.tt.im]);
    }
    let (map, mut m) = PatternMap::build::<f64>(n, n, &coords)?;
    let mv = m.values_mut();
    for (t, v) in vals.into_iter().enumerate() {
        mv[map.slot(t)] += v;
    }
    Ok(m)
}

struct Factored {
    sub: Submatrix,
    lu: LuFactorization,
}

struct Workspace {
    /// (ac pattern, bus kinds) the reduced patterns belong to.
    pattern_key: (u64, u64),
    /// AC value revision the factors belong to.
    values_key: u64,
    sets: BusSets,
    prime: Factored,
    double_prime: Factored,
}

/// Fast decoupled power flow with factor reuse across iterations and calls.
pub struct FastDecoupled {
    pub variant: FastDecoupledVariant,
    pub options: PowerFlowOptions,
    workspace: Option<Workspace>,
    previous: Option<AcState>,
}

impl FastDecoupled {
    pub fn new(variant: FastDecoupledVariant) -> Self {
        Self {
            variant,
            options: PowerFlowOptions::newton(),
            workspace: None,
            previous: None,
        }
    }

    pub fn reset(&mut self) {
        self.workspace = None;
        self.previous = None;
    }

    fn prepare(&mut self, sys: &PowerSystem, reuse: &mut ReuseEvents) -> Result<(), PowerFlowError> {
        let revs = sys.revisions();
        let pattern_key = (revs.ac_pattern, revs.bus_kinds);
        if let Some(ws) = &mut self.workspace {
            if ws.pattern_key == pattern_key {
                reuse.pattern_reused = true;
                if ws.values_key == revs.ac_values {
                    reuse.factor_reused = true;
                    return Ok(());
                }
                let bp = susceptance_matrix(sys, Which::Prime, self.variant)?;
                let bpp = susceptance_matrix(sys, Which::DoublePrime, self.variant)?;
                let mut ok = true;
                for (f, full) in [(&mut ws.prime, &bp), (&mut ws.double_prime, &bpp)] {
                    f.sub.refresh(full);
                    match f.lu.refactor(&f.sub.matrix) {
                        Ok(()) => reuse.refactorizations += 1,
                        Err(SparseError::UnstablePivot { .. }) | Err(SparseError::SingularPivot { .. }) => ok = false,
                        Err(e) => return Err(e.into()),
                    }
                }
                if ok {
                    ws.values_key = revs.ac_values;
                    return Ok(());
                }
            }
        }
        let sets = BusSets::classify(sys)?;
        let n = sys.num_buses();
        let mut keep_p = vec![None; n];
        for (c, &i) in sets.pvpq.iter().enumerate() {
            keep_p[i] = Some(c);
        }
        let mut keep_q = vec![None; n];
        for (c, &i) in sets.pq.iter().enumerate() {
            keep_q[i] = Some(c);
        }
        let bp = susceptance_matrix(sys, Which::Prime, self.variant)?;
        let bpp = susceptance_matrix(sys, Which::DoublePrime, self.variant)?;
        let sp = Submatrix::extract(&bp, &keep_p, sets.pvpq.len());
        let spp = Submatrix::extract(&bpp, &keep_q, sets.pq.len());
        let lp = LuFactorization::factor(&sp.matrix)?;
        let lpp = LuFactorization::factor(&spp.matrix)?;
        reuse.symbolic_analyses += 2;
        reuse.pattern_reused = false;
        self.workspace = Some(Workspace {
            pattern_key,
            values_key: revs.ac_values,
            sets,
            prime: Factored { sub: sp, lu: lp },
            double_prime: Factored { sub: spp, lu: lpp },
        });
        Ok(())
    }

    pub fn solve(&mut self, sys: &PowerSystem, start: Start) -> Result<PowerFlowReport, PowerFlowError> {
        let mut reuse = ReuseEvents::default();
        self.prepare(sys, &mut reuse)?;
        let ws = self.workspace.as_ref().expect("prepared");
        let sets = &ws.sets;
        let (mut state, warm) = initial_state(sys, sets, start, self.previous.as_ref());
        reuse.warm_start = warm;
        let (p_spec, q_spec) = sys.scheduled_injections();
        let mut trace = Vec::new();
        let mut guard = DivergenceGuard::new(self.options.divergence_window);
        let mut iterations = 0;

        let (dp, dq) = power_mismatch(sys, &state, &p_spec, &q_spec);
        let mut mismatch = max_mismatch(sets, &dp, &dq);
        let mut pending = (dp, dq);
        trace.push(mismatch);
        while mismatch >= self.options.tolerance {
            if guard.diverged(mismatch) {
                return Err(PowerFlowError::Diverged { iterations, mismatch });
            }
            if iterations >= self.options.max_iterations {
                return Err(PowerFlowError::MaxIterations { iterations, mismatch });
            }
            iterations += 1;

            let rhs: Vec<f64> = sets.pvpq.iter().map(|&i| pending.0[i] / state.magnitude[i]).collect();
            let dtheta = ws.prime.lu.solve(&rhs);
            let mut ang = state.angle.clone();
            for (c, &i) in sets.pvpq.iter().enumerate() {
                ang[i] += dtheta[c];
            }
            state = AcState::new(state.magnitude.clone(), ang);
            pending = power_mismatch(sys, &state, &p_spec, &q_spec);
            mismatch = max_mismatch(sets, &pending.0, &pending.1);
            if mismatch < self.options.tolerance {
                break;
            }

            let rhs: Vec<f64> = sets.pq.iter().map(|&i| pending.1[i] / state.magnitude[i]).collect();
            let dv = ws.double_prime.lu.solve(&rhs);
            let mut mag = state.magnitude.clone();
            for (c, &i) in sets.pq.iter().enumerate() {
                mag[i] += dv[c];
            }
            state = AcState::new(mag, state.angle.clone());
            pending = power_mismatch(sys, &state, &p_spec, &q_spec);
            mismatch = max_mismatch(sets, &pending.0, &pending.1);
            trace.push(mismatch);
        }
        if trace.last() != Some(&mismatch) {
            trace.push(mismatch);
        }
        if state.magnitude.iter().chain(&state.angle).any(|v| !v.is_finite()) {
            return Err(PowerFlowError::Singular("non-finite iterate".into()));
        }
        self.previous = Some(state.clone());
        let method = match self.variant {
            FastDecoupledVariant::Xb => Method::FastDecoupledXb,
            FastDecoupledVariant::Bx => Method::FastDecoupledBx,
        };
        Ok(finish_report(sys, method, state, iterations, trace, reuse))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::tests::three_bus;
    use crate::network::{Branch, Bus, BusKind, Change, Generator};
    use crate::powerflow::NewtonRaphson;

    #[test]
    fn agrees_with_newton() {
        let sys = three_bus();
        let nr = NewtonRaphson::default().solve(&sys, Start::Flat).unwrap();
        for v in [FastDecoupledVariant::Xb, FastDecoupledVariant::Bx] {
            let fd = FastDecoupled::new(v).solve(&sys, Start::Flat).unwrap();
            for i in 0..3 {
                assert!((fd.magnitude[i] - nr.magnitude[i]).abs() < 1e-7);
                assert!((fd.angle[i] - nr.angle[i]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn load_change_reuses_factors() {
        let mut sys = three_bus();
        let mut fd = FastDecoupled::new(FastDecoupledVariant::Xb);
        let first = fd.solve(&sys, Start::Case).unwrap();
        assert_eq!(first.reuse.symbolic_analyses, 2);
        sys.apply(&Change::BusLoad {
            bus: 2,
            active: Some(0.55),
            reactive: None,
        })
        .unwrap();
        let second = fd.solve(&sys, Start::Warm).unwrap();
        assert!(second.reuse.factor_reused);
        assert_eq!(second.reuse.refactorizations, 0);
        assert_eq!(second.reuse.symbolic_analyses, 0);
    }

    #[test]
    fn lossless_network_gives_identical_variants() {
        let mut b2 = Bus::new(2, BusKind::Pq);
        b2.active_load = 0.4;
        b2.reactive_load = 0.1;
        let mut b3 = Bus::new(3, BusKind::Pq);
        b3.active_load = 0.2;
        let sys = PowerSystem::new(
            100.0,
            vec![Bus::new(1, BusKind::Slack), b2, b3],
            vec![
                Branch::line(1, 2, 0.0, 0.1),
                Branch::line(2, 3, 0.0, 0.2),
                Branch::line(1, 3, 0.0, 0.15),
            ],
            vec![Generator::new(1, 0.0)],
        )
        .unwrap();
        let xb = FastDecoupled::new(FastDecoupledVariant::Xb).solve(&sys, Start::Flat).unwrap();
        let bx = FastDecoupled::new(FastDecoupledVariant::Bx).solve(&sys, Start::Flat).unwrap();
        assert_eq!(xb.mismatch_trace, bx.mismatch_trace);
        assert_eq!(xb.angle, bx.angle);
    }
}
