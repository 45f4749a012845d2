use super::{
    finish_report, initial_state, max_mismatch, power_mismatch, BusSets, DivergenceGuard, Method, PowerFlowError,
    PowerFlowOptions, PowerFlowReport, ReuseEvents, Start,
};
use crate::functions::{ac_gradient, AcState, Coord, Quantity};
use crate::network::{PowerSystem, Revisions};
use crate::sparse::{CscMatrix, LuFactorization, PatternMap, SparseError};

/// Jacobian structure valid for one Y pattern and one set of bus roles.
struct JacobianWorkspace {
    key: (u64, u64),
    sets: BusSets,
    map: PatternMap,
    jac: CscMatrix<f64>,
    lu: Option<LuFactorization>,
}

/// Newton-Raphson power flow in polar coordinates.
pub struct NewtonRaphson {
    pub options: PowerFlowOptions,
    workspace: Option<JacobianWorkspace>,
    previous: Option<AcState>,
}

impl Default for NewtonRaphson {
    fn default() -> Self {
        Self::new(PowerFlowOptions::newton())
    }
}

/// Row quantities and column coordinates of the reduced Jacobian.
fn layout(sets: &BusSets, n: usize) -> (Vec<Quantity>, Vec<Option<usize>>, Vec<Option<usize>>) {
    let mut rows: Vec<Quantity> = sets.pvpq.iter().map(|&i| Quantity::ActiveInjection(i)).collect();
    rows.extend(sets.pq.iter().map(|&i| Quantity::ReactiveInjection(i)));
    let mut angle_col = vec![None; n];
    let mut mag_col = vec![None; n];
    for (c, &i) in sets.pvpq.iter().enumerate() {
        angle_col[i] = Some(c);
    }
    for (c, &i) in sets.pq.iter().enumerate() {
        mag_col[i] = Some(sets.pvpq.len() + c);
    }
    (rows, angle_col, mag_col)
}

fn jacobian_triplets(
    sys: &PowerSystem,
    state: &AcState,
    rows: &[Quantity],
    angle_col: &[Option<usize>],
    mag_col: &[Option<usize>],
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for (r, &q) in rows.iter().enumerate() {
        let (_, grad) = ac_gradient(sys, state, q);
        for (coord, d) in grad {
            let col = match coord {
                Coord::Angle(i) => angle_col[i],
                Coord::Magnitude(i) => mag_col[i],
            };
            if let Some(c) = col {
                out.push((r, c, d));
            }
        }
    }
    out
}

impl NewtonRaphson {
    pub fn new(options: PowerFlowOptions) -> Self {
        Self {
            options,
            workspace: None,
            previous: None,
        }
    }

    /// Forgets cached patterns, factorizations and the warm-start point.
    pub fn reset(&mut self) {
        self.workspace = None;
        self.previous = None;
    }

    pub fn solve(&mut self, sys: &PowerSystem, start: Start) -> Result<PowerFlowReport, PowerFlowError> {
        let revs: Revisions = sys.revisions();
        let key = (revs.ac_pattern, revs.bus_kinds);
        let mut reuse = ReuseEvents::default();
        let sets = match &self.workspace {
            Some(ws) if ws.key == key => {
                reuse.pattern_reused = true;
                ws.sets.clone()
            }
            _ => {
                self.workspace = None;
                BusSets::classify(sys)?
            }
        };
        let n = sys.num_buses();
        let (rows, angle_col, mag_col) = layout(&sets, n);
        let dim = rows.len();
        let (mut state, warm) = initial_state(sys, &sets, start, self.previous.as_ref());
        reuse.warm_start = warm;
        let (p_spec, q_spec) = sys.scheduled_injections();

        let mut trace = Vec::new();
        let mut guard = DivergenceGuard::new(self.options.divergence_window);
        let mut iterations = 0;
        loop {
            let (dp, dq) = power_mismatch(sys, &state, &p_spec, &q_spec);
            let mismatch = max_mismatch(&sets, &dp, &dq);
            trace.push(mismatch);
            if mismatch < self.options.tolerance {
                break;
            }
            if guard.diverged(mismatch) {
                return Err(PowerFlowError::Diverged { iterations, mismatch });
            }
            if iterations >= self.options.max_iterations {
                return Err(PowerFlowError::MaxIterations { iterations, mismatch });
            }

            let trip = jacobian_triplets(sys, &state, &rows, &angle_col, &mag_col);
            let ws = match &mut self.workspace {
                Some(ws) if ws.map.len() == trip.len() => ws,
                _ => {
                    let coords: Vec<(usize, usize)> = trip.iter().map(|&(r, c, _)| (r, c)).collect();
                    let (map, jac) = PatternMap::build::<f64>(dim, dim, &coords)?;
                    reuse.pattern_reused = false;
                    self.workspace.insert(JacobianWorkspace {
                        key,
                        sets: sets.clone(),
                        map,
                        jac,
                        lu: None,
                    })
                }
            };
            ws.jac.clear_values();
            {
                let vals = ws.jac.values_mut();
                for (t, &(_, _, v)) in trip.iter().enumerate() {
                    vals[ws.map.slot(t)] += v;
                }
            }
            let refactored = match &mut ws.lu {
                Some(lu) => match lu.refactor(&ws.jac) {
                    Ok(()) => true,
                    Err(SparseError::UnstablePivot { .. }) | Err(SparseError::SingularPivot { .. }) => false,
                    Err(e) => return Err(e.into()),
                },
                None => false,
            };
            if refactored {
                reuse.refactorizations += 1;
            } else {
                ws.lu = Some(LuFactorization::factor(&ws.jac)?);
                reuse.symbolic_analyses += 1;
            }
            let lu = ws.lu.as_ref().expect("factored above");

            let mut rhs = Vec::with_capacity(dim);
            rhs.extend(sets.pvpq.iter().map(|&i| dp[i]));
            rhs.extend(sets.pq.iter().map(|&i| dq[i]));
            let dx = lu.solve(&rhs);
            if dx.iter().any(|v| !v.is_finite()) {
                return Err(PowerFlowError::Singular("non-finite Newton step".into()));
            }
            let mut mag = state.magnitude.clone();
            let mut ang = state.angle.clone();
            for (c, &i) in sets.pvpq.iter().enumerate() {
                ang[i] += dx[c];
            }
            for (c, &i) in sets.pq.iter().enumerate() {
                mag[i] += dx[sets.pvpq.len() + c];
            }
            state = AcState::new(mag, ang);
            iterations += 1;
        }
        self.previous = Some(state.clone());
        Ok(finish_report(sys, Method::NewtonRaphson, state, iterations, trace, reuse))
    }
}
