use super::{solve_lp_with, LinearProgram, LpError, LpOutcome, LpSolution, SimplexOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlpOptions {
    pub node_budget: usize,
    /// Distance from 0 or 1 still treated as integral.
    pub integrality_tol: f64,
    pub simplex: SimplexOptions,
}

impl Default for IlpOptions {
    fn default() -> Self {
        Self {
            node_budget: 200_000,
            integrality_tol: 1e-6,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IlpOutcome {
    Optimal { solution: LpSolution, nodes: usize },
    Infeasible,
}

/// Depth-first branch-and-bound over the LP relaxation. Branches on the most
/// fractional binary (lowest index on ties), exploring `x = 1` first.
pub fn solve_binary_ilp(lp: &LinearProgram, opts: &IlpOptions) -> Result<IlpOutcome, LpError> {
    lp.validate()?;
    for j in 0..lp.num_variables() {
        if lp.integer[j] && (lp.lower[j] < 0.0 || lp.upper[j] > 1.0) {
            return Err(LpError::InvalidProblem(format!(
                "integer variable {j} is not binary"
            )));
        }
    }
    let mut incumbent: Option<LpSolution> = None;
    let mut nodes = 0usize;
    let mut stack: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    let mut node_lp = lp.clone();
    while let Some(fixings) = stack.pop() {
        if nodes >= opts.node_budget {
            return Err(LpError::NodeBudgetExceeded {
                nodes,
                incumbent: incumbent.map(Box::new),
            });
        }
        nodes += 1;
        node_lp.lower.copy_from_slice(&lp.lower);
        node_lp.upper.copy_from_slice(&lp.upper);
        for &(j, v) in &fixings {
            node_lp.lower[j] = v;
            node_lp.upper[j] = v;
        }
        let relaxed = match solve_lp_with(&node_lp, &opts.simplex)? {
            LpOutcome::Optimal(s) => s,
            LpOutcome::Infeasible { .. } => continue,
            LpOutcome::Unbounded { variable } => {
                return Err(LpError::InvalidProblem(format!(
                    "relaxation unbounded along variable {variable}"
                )))
            }
        };
        if let Some(best) = &incumbent {
            if relaxed.objective >= best.objective - 1e-9 {
                continue;
            }
        }
        let mut branch: Option<(usize, f64)> = None;
        for j in 0..lp.num_variables() {
            if !lp.integer[j] {
                continue;
            }
            let frac = relaxed.x[j] - relaxed.x[j].floor();
            if frac <= opts.integrality_tol || frac >= 1.0 - opts.integrality_tol {
                continue;
            }
            let distance = (frac - 0.5).abs();
            if branch.is_none_or(|(_, d)| distance < d) {
                branch = Some((j, distance));
            }
        }
        match branch {
            None => {
                let mut s = relaxed;
                for j in 0..lp.num_variables() {
                    if lp.integer[j] {
                        s.x[j] = s.x[j].round();
                    }
                }
                s.objective = lp.evaluate(&s.x);
                incumbent = Some(s);
            }
            Some((j, _)) => {
                let mut zero = fixings.clone();
                zero.push((j, 0.0));
                let mut one = fixings;
                one.push((j, 1.0));
                stack.push(zero);
                stack.push(one);
            }
        }
    }
    Ok(match incumbent {
        Some(solution) => IlpOutcome::Optimal { solution, nodes },
        None => IlpOutcome::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Sense;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn optimum(lp: &LinearProgram) -> LpSolution {
        match solve_binary_ilp(lp, &IlpOptions::default()).unwrap() {
            IlpOutcome::Optimal { solution, .. } => solution,
            IlpOutcome::Infeasible => panic!("infeasible"),
        }
    }

    #[test]
    fn single_cover_row() {
        let mut lp = LinearProgram::new();
        let a = lp.add_binary(1.0);
        let b = lp.add_binary(1.0);
        lp.add_constraint(vec![(a, 1.0), (b, 1.0)], Sense::Ge, 1.0);
        assert!((optimum(&lp).objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn path_of_three_needs_the_center() {
        let mut lp = LinearProgram::new();
        let v: Vec<usize> = (0..3).map(|_| lp.add_binary(1.0)).collect();
        lp.add_constraint(vec![(v[0], 1.0), (v[1], 1.0)], Sense::Ge, 1.0);
        lp.add_constraint(vec![(v[0], 1.0), (v[1], 1.0), (v[2], 1.0)], Sense::Ge, 1.0);
        lp.add_constraint(vec![(v[1], 1.0), (v[2], 1.0)], Sense::Ge, 1.0);
        let s = optimum(&lp);
        assert_eq!(s.x, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn infeasible_cover() {
        let mut lp = LinearProgram::new();
        let a = lp.add_binary(1.0);
        lp.add_constraint(vec![(a, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve_binary_ilp(&lp, &IlpOptions::default()).unwrap(), IlpOutcome::Infeasible);
    }

    #[test]
    fn node_budget_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lp = random_cover(&mut rng, 12, 14);
        let opts = IlpOptions {
            node_budget: 1,
            ..Default::default()
        };
        match solve_binary_ilp(&lp, &opts) {
            Ok(IlpOutcome::Optimal { nodes, .. }) => assert_eq!(nodes, 1),
            Err(LpError::NodeBudgetExceeded { nodes, .. }) => assert_eq!(nodes, 1),
            other => panic!("{other:?}"),
        }
    }

    fn random_cover(rng: &mut ChaCha8Rng, n: usize, rows: usize) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for _ in 0..n {
            lp.add_binary(rng.random_range(1..4) as f64);
        }
        for _ in 0..rows {
            let mut members: Vec<(usize, f64)> =
                (0..n).filter(|_| rng.random_bool(0.25)).map(|j| (j, 1.0)).collect();
            if members.is_empty() {
                members.push((rng.random_range(0..n), 1.0));
            }
            lp.add_constraint(members, Sense::Ge, 1.0);
        }
        lp
    }

    #[test]
    fn random_set_cover_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let n = 12;
            let lp = random_cover(&mut rng, n, 15);
            let s = optimum(&lp);
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << n) {
                let x: Vec<f64> = (0..n).map(|j| (mask >> j & 1) as f64).collect();
                if lp.max_violation(&x) <= 0.0 {
                    best = best.min(lp.evaluate(&x));
                }
            }
            assert_eq!(s.objective, best);
            assert!(lp.max_violation(&s.x) <= 0.0);
        }
    }
}
