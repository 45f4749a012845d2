//! DC optimal power flow: generator outputs and bus angles as LP variables,
//! with linear or convex piecewise-linear costs.

use crate::lp::{solve_lp_with, LinearProgram, LpError, LpOutcome, Sense, SimplexOptions};
use crate::network::{branch_susceptance, CostCurve, NetworkError, PowerSystem};
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_SEGMENTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("generator {0} has no cost curve")]
    MissingCost(usize),
    #[error(
        "generator {generator} has a degree-{degree} polynomial cost; DC OPF needs linear or piecewise-linear costs \
         (approximate it with piecewise_linearize, or `--segments` on the command line)"
    )]
    NonlinearCost { generator: usize, degree: usize },
    #[error("cannot linearize the cost of generator {0} without finite output limits")]
    UnboundedCostRange(usize),
    #[error("infeasible; violated constraints: {}", constraints.join(", "))]
    Infeasible { constraints: Vec<String> },
    #[error("unbounded; {0} can grow without limit")]
    Unbounded(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DcOpfReport {
    /// Active output per generator (0 when out of service).
    pub dispatch: Vec<f64>,
    pub angle: Vec<f64>,
    /// From-side active flow per branch.
    pub flows: Vec<f64>,
    pub objective: f64,
    /// Marginal cost of demand at each bus (balance-row duals).
    pub prices: Vec<f64>,
    pub iterations: usize,
    /// Largest absolute nodal balance error at the solution.
    pub balance_residual: f64,
}

#[derive(Debug, Clone, Default)]
pub struct DcOpfOptions {
    pub simplex: SimplexOptions,
    /// Starting angles, typically from a power flow.
    pub warm_angles: Option<Vec<f64>>,
}

/// Chord approximation of a convex polynomial cost over `[pmin, pmax]`.
pub fn piecewise_linearize(curve: &CostCurve, pmin: f64, pmax: f64, segments: usize) -> CostCurve {
    match curve {
        CostCurve::PiecewiseLinear { .. } => curve.clone(),
        CostCurve::Polynomial { .. } => {
            let segments = segments.max(1);
            let points = (0..=segments)
                .map(|k| {
                    let p = pmin + (pmax - pmin) * k as f64 / segments as f64;
                    (p, curve.evaluate(p))
                })
                .collect();
            CostCurve::PiecewiseLinear { points }
        }
    }
}

/// Replaces every polynomial cost of degree two or more by its chord
/// approximation between the generator's limits.
pub fn linearize_costs(sys: &PowerSystem, segments: usize) -> Result<PowerSystem, OpfError> {
    let mut gens = sys.generators().to_vec();
    for (k, g) in gens.iter_mut().enumerate() {
        if let Some(CostCurve::Polynomial { coefficients }) = &g.cost {
            if polynomial_degree(coefficients) >= 2 {
                if !(g.active_min.is_finite() && g.active_max.is_finite()) || g.active_max <= g.active_min {
                    return Err(OpfError::UnboundedCostRange(k + 1));
                }
                g.cost = Some(piecewise_linearize(g.cost.as_ref().expect("matched"), g.active_min, g.active_max, segments));
            }
        }
    }
    Ok(PowerSystem::new(sys.base_mva(), sys.buses().to_vec(), sys.branches().to_vec(), gens)?)
}

fn polynomial_degree(c: &[f64]) -> usize {
    c.iter().rposition(|&v| v != 0.0).unwrap_or(0)
}

/// The assembled LP and the meaning of its rows and columns.
struct Formulation {
    lp: LinearProgram,
    generator_column: Vec<Option<usize>>,
    angle_column: Vec<usize>,
    balance_rows: Vec<usize>,
    row_names: Vec<String>,
    column_names: Vec<String>,
}

fn formulate(sys: &PowerSystem, warm_angles: Option<&[f64]>) -> Result<Formulation, OpfError> {
    let dc = sys.dc()?;
    let n = sys.num_buses();
    let slack = sys.slack_index()?;
    let mut lp = LinearProgram::new();
    let mut row_names = Vec::new();
    let mut column_names = Vec::new();

    let mut generator_column = vec![None; sys.generators().len()];
    let mut epigraph = Vec::new();
    for (k, g) in sys.generators().iter().enumerate() {
        if !g.in_service {
            continue;
        }
        let cost = g.cost.as_ref().ok_or(OpfError::MissingCost(k + 1))?;
        cost.validate()?;
        let col = match cost {
            CostCurve::Polynomial { coefficients } => {
                let degree = polynomial_degree(coefficients);
                if degree > 1 {
                    return Err(OpfError::NonlinearCost { generator: k + 1, degree });
                }
                lp.objective_offset += coefficients.first().copied().unwrap_or(0.0);
                lp.add_variable(coefficients.get(1).copied().unwrap_or(0.0), g.active_min, g.active_max)
            }
            CostCurve::PiecewiseLinear { points } => {
                let col = lp.add_variable(0.0, g.active_min, g.active_max);
                epigraph.push((k, col, points.clone()));
                col
            }
        };
        column_names.push(format!("output of generator {}", k + 1));
        generator_column[k] = Some(col);
    }
    for (k, col, points) in epigraph {
        let t = lp.add_variable(1.0, f64::NEG_INFINITY, f64::INFINITY);
        column_names.push(format!("cost of generator {}", k + 1));
        for w in points.windows(2) {
            let slope = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
            // t ≥ y0 + slope (P − x0)
            lp.add_constraint(vec![(col, slope), (t, -1.0)], Sense::Le, slope * w[0].0 - w[0].1);
            row_names.push(format!("cost segment of generator {}", k + 1));
        }
    }

    let mut angle_column = Vec::with_capacity(n);
    for (i, bus) in sys.buses().iter().enumerate() {
        let (lo, hi) = if i == slack {
            (bus.voltage_angle, bus.voltage_angle)
        } else {
            (f64::NEG_INFINITY, f64::INFINITY)
        };
        angle_column.push(lp.add_variable(0.0, lo, hi));
        column_names.push(format!("angle of bus {}", bus.id));
    }
    if let Some(theta) = warm_angles.filter(|t| t.len() == n) {
        let mut init = vec![0.0; lp.num_variables()];
        for i in 0..n {
            init[angle_column[i]] = theta[i];
        }
        lp.initial = Some(init);
    }

    // B θ − Σ P_g = −P_d − constant
    let b = dc.bmatrix();
    let constant = dc.constant_injection();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for j in 0..n {
        let (idx, vals) = b.col(j);
        for (&i, &v) in idx.iter().zip(vals) {
            if v != 0.0 {
                rows[i].push((angle_column[j], v));
            }
        }
    }
    for (k, g) in sys.generators().iter().enumerate() {
        if let Some(col) = generator_column[k] {
            let i = sys.bus_index(g.bus).expect("validated");
            rows[i].push((col, -1.0));
        }
    }
    let mut balance_rows = Vec::with_capacity(n);
    for (i, coeffs) in rows.into_iter().enumerate() {
        let bus = &sys.buses()[i];
        balance_rows.push(lp.add_constraint(coeffs, Sense::Eq, -bus.active_load - constant[i]));
        row_names.push(format!("power balance at bus {}", bus.id));
    }

    for (k, br) in sys.branches().iter().enumerate() {
        if !br.in_service || br.rating <= 0.0 {
            continue;
        }
        let (f, t) = sys.branch_ends(k);
        let s = branch_susceptance(br);
        let shift = s * br.phase_shift;
        let coeffs = vec![(angle_column[f], s), (angle_column[t], -s)];
        lp.add_constraint(coeffs.clone(), Sense::Le, br.rating + shift);
        row_names.push(format!("flow limit of branch {} ({} to {})", k + 1, br.from_bus, br.to_bus));
        lp.add_constraint(coeffs, Sense::Ge, -br.rating + shift);
        row_names.push(format!("flow limit of branch {} ({} to {})", k + 1, br.to_bus, br.from_bus));
    }
    Ok(Formulation {
        lp,
        generator_column,
        angle_column,
        balance_rows,
        row_names,
        column_names,
    })
}

pub fn solve_dc_opf(sys: &PowerSystem, options: &DcOpfOptions) -> Result<DcOpfReport, OpfError> {
    let f = formulate(sys, options.warm_angles.as_deref())?;
    let sol = match solve_lp_with(&f.lp, &options.simplex)? {
        LpOutcome::Optimal(s) => s,
        LpOutcome::Infeasible { violated_rows } => {
            let mut constraints: Vec<String> = violated_rows.iter().map(|&r| f.row_names[r].clone()).collect();
            constraints.dedup();
            return Err(OpfError::Infeasible { constraints });
        }
        LpOutcome::Unbounded { variable } => {
            return Err(OpfError::Unbounded(
                f.column_names.get(variable).cloned().unwrap_or_else(|| format!("variable {variable}")),
            ))
        }
    };
    let dispatch: Vec<f64> = f.generator_column.iter().map(|c| c.map_or(0.0, |c| sol.x[c])).collect();
    let angle: Vec<f64> = f.angle_column.iter().map(|&c| sol.x[c]).collect();
    let dc = sys.dc()?;
    let flows = sys
        .branches()
        .iter()
        .enumerate()
        .map(|(k, br)| {
            if !br.in_service {
                return 0.0;
            }
            let (a, b) = sys.branch_ends(k);
            crate::network::DcModel::branch_flow(br, angle[a], angle[b]).0
        })
        .collect();
    let mut net: Vec<f64> = sys.buses().iter().map(|b| -b.active_load).collect();
    for (g, p) in sys.generators().iter().zip(&dispatch) {
        net[sys.bus_index(g.bus).expect("validated")] += p;
    }
    let injected = dc.injections(&angle);
    let balance_residual = injected.iter().zip(&net).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    // The balance rows are written as −generation, so their duals are
    // already prices of demand.
    let prices = f.balance_rows.iter().map(|&r| -sol.duals[r]).collect();
    Ok(DcOpfReport {
        dispatch,
        angle,
        flows,
        objective: sol.objective,
        prices,
        iterations: sol.iterations,
        balance_residual,
    })
}
