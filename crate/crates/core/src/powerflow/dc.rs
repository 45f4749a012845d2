use super::{unreachable_buses, PowerFlowError, ReuseEvents, Submatrix};
use crate::network::{DcModel, PowerSystem};
use crate::sparse::{LuFactorization, SparseError};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcPowerFlowReport {
    pub angle: Vec<f64>,
    /// Net active injection per bus, including the slack.
    pub injection: Vec<f64>,
    /// From-side active flow per branch.
    pub flows: Vec<f64>,
    pub slack_injection: f64,
    pub reuse: ReuseEvents,
}

struct Workspace {
    pattern: u64,
    values: u64,
    slack: usize,
    sub: Submatrix,
    lu: LuFactorization,
}

/// Linear power flow with the slack angle fixed.
#[derive(Default)]
pub struct DcPowerFlow {
    workspace: Option<Workspace>,
}

impl DcPowerFlow {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.workspace = None;
    }

    fn prepare(&mut self, sys: &PowerSystem, dc: &DcModel, slack: usize, reuse: &mut ReuseEvents) -> Result<(), PowerFlowError> {
        let revs = sys.revisions();
        if let Some(ws) = &mut self.workspace {
            if ws.pattern == revs.dc_pattern && ws.slack == slack {
                reuse.pattern_reused = true;
                if ws.values == revs.dc_values {
                    reuse.factor_reused = true;
                    return Ok(());
                }
                ws.sub.refresh(dc.bmatrix());
                match ws.lu.refactor(&ws.sub.matrix) {
                    Ok(()) => {
                        reuse.refactorizations += 1;
                        ws.values = revs.dc_values;
                        return Ok(());
                    }
                    Err(SparseError::UnstablePivot { .. }) | Err(SparseError::SingularPivot { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
        }
        let n = sys.num_buses();
        let keep: Vec<Option<usize>> = (0..n)
            .map(|i| match i.cmp(&slack) {
                std::cmp::Ordering::Less => Some(i),
                std::cmp::Ordering::Equal => None,
                std::cmp::Ordering::Greater => Some(i - 1),
            })
            .collect();
        let sub = Submatrix::extract(dc.bmatrix(), &keep, n - 1);
        let lu = LuFactorization::factor(&sub.matrix)?;
        reuse.symbolic_analyses += 1;
        reuse.pattern_reused = false;
        self.workspace = Some(Workspace {
            pattern: revs.dc_pattern,
            values: revs.dc_values,
            slack,
            sub,
            lu,
        });
        Ok(())
    }

    pub fn solve(&mut self, sys: &PowerSystem) -> Result<DcPowerFlowReport, PowerFlowError> {
        let slack = sys.slack_index()?;
        let islanded = unreachable_buses(sys, slack);
        if !islanded.is_empty() {
            return Err(PowerFlowError::Island { buses: islanded });
        }
        let dc = sys.dc()?;
        let mut reuse = ReuseEvents::default();
        self.prepare(sys, dc, slack, &mut reuse)?;
        let ws = self.workspace.as_ref().expect("prepared");

        let (p_spec, _) = sys.scheduled_injections();
        let constant = dc.constant_injection();
        let slack_angle = sys.buses()[slack].voltage_angle;
        let b = dc.bmatrix();
        let mut rhs: Vec<f64> = (0..sys.num_buses())
            .filter(|&i| i != slack)
            .map(|i| p_spec[i] - constant[i] - b.get(i, slack) * slack_angle)
            .collect();
        rhs = ws.lu.solve(&rhs);
        let mut angle = Vec::with_capacity(sys.num_buses());
        let mut it = rhs.into_iter();
        for i in 0..sys.num_buses() {
            angle.push(if i == slack { slack_angle } else { it.next().expect("reduced length") });
        }
        let injection = dc.injections(&angle);
        let flows = sys
            .branches()
            .iter()
            .enumerate()
            .map(|(k, br)| {
                let (f, t) = sys.branch_ends(k);
                if br.in_service {
                    DcModel::branch_flow(br, angle[f], angle[t]).0
                } else {
                    0.0
                }
            })
            .collect();
        Ok(DcPowerFlowReport {
            slack_injection: injection[slack],
            angle,
            injection,
            flows,
            reuse,
        })
    }
}
