use super::model::MeasurementModel;
use super::solve::{linearize, Linearization};
use super::{EstimationError, EstimationOptions};
use crate::lp::{solve_lp_with, LinearProgram, LpOutcome, Sense, SimplexOptions};
use crate::network::PowerSystem;

const INITIAL_RADIUS: f64 = 0.5;

/// One least-absolute-value step: minimizes `Σ|r_i − J_i Δx|` with the
/// split-variable LP `J Δx + u − v = r`, `u, v ≥ 0`, optionally inside the
/// box `|Δx_j| ≤ radius`. Returns the step and the predicted objective.
///
/// For the linear models the linearization is taken at the origin, so the
/// step is the estimate itself.
pub(super) fn step(
    model: &MeasurementModel,
    lin: &Linearization,
    simplex: &SimplexOptions,
    radius: Option<f64>,
) -> Result<(Vec<f64>, f64), EstimationError> {
    let m = model.layout.dim();
    let bound = radius.unwrap_or(f64::INFINITY);
    let mut lp = LinearProgram::new();
    for _ in 0..m {
        lp.add_variable(0.0, -bound, bound);
    }
    for (b, local) in lin.blocks.iter().enumerate() {
        let Some(local) = local else { continue };
        let blk = &model.blocks[b];
        let nc = blk.columns.len();
        for slot in 0..blk.rows.len() {
            let u = lp.add_variable(1.0, 0.0, f64::INFINITY);
            let v = lp.add_variable(1.0, 0.0, f64::INFINITY);
            let mut coeffs: Vec<(usize, f64)> = blk
                .columns
                .iter()
                .enumerate()
                .map(|(p, &c)| (c, local.jacobian[slot * nc + p]))
                .filter(|&(_, a)| a != 0.0)
                .collect();
            coeffs.push((u, 1.0));
            coeffs.push((v, -1.0));
            lp.add_constraint(coeffs, Sense::Eq, local.residual[slot]);
        }
    }
    match solve_lp_with(&lp, simplex)? {
        LpOutcome::Optimal(sol) => Ok((sol.x[..m].to_vec(), sol.objective)),
        LpOutcome::Infeasible { .. } => Err(EstimationError::LavFailed("infeasible".into())),
        LpOutcome::Unbounded { .. } => Err(EstimationError::LavFailed("unbounded".into())),
    }
}

fn absolute_sum(lin: &Linearization) -> f64 {
    lin.blocks.iter().flatten().flat_map(|b| b.residual).map(f64::abs).sum()
}

/// Successive linear programming with a box trust region for the AC model.
/// A step is taken only when the true absolute residual sum falls by at
/// least a tenth of what the LP predicted; otherwise the box shrinks.
/// Returns the accepted step norms and whether the iteration converged.
pub(super) fn trust_region(
    model: &MeasurementModel,
    sys: &PowerSystem,
    x: &mut [f64],
    options: &EstimationOptions,
) -> Result<(Vec<f64>, bool), EstimationError> {
    let mut radius = INITIAL_RADIUS;
    let mut norms = Vec::new();
    let mut lin = linearize(model, sys, x);
    let mut current = absolute_sum(&lin);
    for _ in 0..options.max_iterations.max(1) {
        let (dx, predicted) = step(model, &lin, &options.simplex, Some(radius))?;
        let norm = dx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !norm.is_finite() {
            return Err(EstimationError::Diverged);
        }
        let gain = current - predicted;
        if norm < options.tolerance || gain <= 1e-14 * current.max(1.0) {
            norms.push(norm);
            return Ok((norms, true));
        }
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + d).collect();
        let trial_lin = linearize(model, sys, &trial);
        let achieved = current - absolute_sum(&trial_lin);
        let ratio = achieved / gain;
        if ratio > 0.1 {
            x.copy_from_slice(&trial);
            lin = trial_lin;
            current -= achieved;
            norms.push(norm);
            if ratio > 0.75 && norm > 0.9 * radius {
                radius *= 2.0;
            }
        } else {
            radius = 0.25 * norm;
            if radius < options.tolerance {
                return Ok((norms, true));
            }
        }
    }
    Ok((norms, false))
}
