use super::{LinearProgram, LpError, LpOutcome, LpSolution, Sense};
use crate::sparse::{CscMatrix, LuFactorization, LuOptions, SparseError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Primal feasibility tolerance.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality_tol: f64,
    /// Smallest basis-column entry accepted as a pivot.
    pub pivot_tol: f64,
    /// Pivots between fresh LU factorizations of the basis.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
    /// Pivot budget; `None` scales with problem size.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            refactor_interval: 64,
            degenerate_limit: 50,
            max_iterations: None,
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome, LpError> {
    solve_lp_with(lp, &SimplexOptions::default())
}

pub fn solve_lp_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpOutcome, LpError> {
    lp.validate()?;
    let mut t = Tableau::build(lp, *opts);
    t.run_phase_one()?;
    let infeasibility: f64 = t.artificials.iter().map(|&a| t.x[a]).sum();
    let scale = 1.0 + lp.constraints.iter().fold(0.0f64, |m, c| m.max(c.rhs.abs()));
    if infeasibility > 1e-7 * scale {
        let mut violated_rows: Vec<usize> = t
            .artificials
            .iter()
            .filter(|&&a| t.x[a] > t.opts.feasibility_tol * scale)
            .map(|&a| t.artificial_row[a - t.n - t.m])
            .collect();
        violated_rows.sort_unstable();
        return Ok(LpOutcome::Infeasible { violated_rows });
    }
    for &a in &t.artificials {
        t.upper[a] = 0.0;
        t.x[a] = 0.0;
    }
    t.cost = lp.objective.clone();
    t.cost.resize(t.total, 0.0);
    match t.iterate(true)? {
        Some(variable) => Ok(LpOutcome::Unbounded { variable }),
        None => {
            t.refactor()?;
            let y = t.btran_costs();
            let x: Vec<f64> = t.x[..t.n].to_vec();
            let reduced_costs = (0..t.n).map(|j| t.cost[j] - t.column_dot(j, &y)).collect();
            Ok(LpOutcome::Optimal(LpSolution {
                objective: lp.evaluate(&x),
                x,
                duals: y,
                reduced_costs,
                iterations: t.iterations,
            }))
        }
    }
}

const NOT_BASIC: usize = usize::MAX;

/// One product-form update: the basis column at position `r` was replaced,
/// and `w = B⁻¹ a_q` was the entering column in the old basis.
struct Eta {
    r: usize,
    pivot: f64,
    others: Vec<(usize, f64)>,
}

struct Tableau {
    m: usize,
    n: usize,
    total: usize,
    opts: SimplexOptions,
    /// Structural columns; slacks and artificials are implicit unit columns.
    a: CscMatrix<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    /// Basis position of each variable, or `NOT_BASIC`.
    pos: Vec<usize>,
    basis: Vec<usize>,
    artificials: Vec<usize>,
    artificial_row: Vec<usize>,
    artificial_sign: Vec<f64>,
    lu: Option<LuFactorization>,
    etas: Vec<Eta>,
    iterations: usize,
    budget: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram, opts: SimplexOptions) -> Self {
        let m = lp.constraints.len();
        let n = lp.objective.len();
        let mut trip = Vec::new();
        for (i, c) in lp.constraints.iter().enumerate() {
            for &(j, v) in &c.coefficients {
                trip.push((i, j, v));
            }
        }
        let a = CscMatrix::from_triplets(m, n, &trip).expect("validated indices");
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        for c in &lp.constraints {
            // Row i becomes a_i x + s_i = b_i.
            let (lo, hi) = match c.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut x = vec![0.0; n + m];
        for j in 0..n {
            x[j] = if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                lp.initial.as_ref().map_or(0.0, |v| v[j])
            };
        }
        let ax = a.mul_vec(&x[..n]);
        let rhs: Vec<f64> = lp.constraints.iter().map(|c| c.rhs).collect();

        let mut basis = Vec::with_capacity(m);
        let mut artificials = Vec::new();
        let mut artificial_row = Vec::new();
        let mut artificial_sign = Vec::new();
        let mut art_values = Vec::new();
        for i in 0..m {
            let s = n + i;
            let slack_value = rhs[i] - ax[i];
            if slack_value >= lower[s] && slack_value <= upper[s] {
                x[s] = slack_value;
                basis.push(s);
            } else {
                let bound = if slack_value < lower[s] { lower[s] } else { upper[s] };
                x[s] = bound;
                let resid = slack_value - bound;
                artificial_row.push(i);
                artificial_sign.push(resid.signum());
                art_values.push(resid.abs());
                basis.push(NOT_BASIC);
            }
        }
        let total = n + m + artificial_row.len();
        for (k, v) in art_values.into_iter().enumerate() {
            let idx = n + m + k;
            basis[artificial_row[k]] = idx;
            artificials.push(idx);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(v);
        }
        let mut pos = vec![NOT_BASIC; total];
        for (r, &b) in basis.iter().enumerate() {
            pos[b] = r;
        }
        let mut cost = vec![0.0; total];
        for &a in &artificials {
            cost[a] = 1.0;
        }
        let budget = opts.max_iterations.unwrap_or(20_000 + 50 * (total + m));
        Self {
            m,
            n,
            total,
            opts,
            a,
            rhs,
            lower,
            upper,
            cost,
            x,
            pos,
            basis,
            artificials,
            artificial_row,
            artificial_sign,
            lu: None,
            etas: Vec::new(),
            iterations: 0,
            budget,
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            let (rows, vals) = self.a.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                f(i, v);
            }
        } else if j < self.n + self.m {
            f(j - self.n, 1.0);
        } else {
            let k = j - self.n - self.m;
            f(self.artificial_row[k], self.artificial_sign[k]);
        }
    }

    fn column_dot(&self, j: usize, y: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_column(j, |i, v| s += v * y[i]);
        s
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let mut trip = Vec::new();
        for (r, &b) in self.basis.iter().enumerate() {
            self.for_column(b, |i, v| trip.push((i, r, v)));
        }
        let bmat = CscMatrix::from_triplets(self.m, self.m, &trip).map_err(|e| LpError::Numerical(e.to_string()))?;
        let lu = LuFactorization::factor_with(&bmat, LuOptions::default()).map_err(|e| match e {
            SparseError::SingularPivot { .. } | SparseError::UnstablePivot { .. } => {
                LpError::Numerical("basis became singular".into())
            }
            other => LpError::Numerical(other.to_string()),
        })?;
        self.lu = Some(lu);
        self.etas.clear();

        // Recompute basic values from the nonbasic ones to shed drift.
        let mut r = self.rhs.clone();
        for j in 0..self.total {
            if self.pos[j] == NOT_BASIC && self.x[j] != 0.0 {
                let xj = self.x[j];
                self.for_column(j, |i, v| r[i] -= v * xj);
            }
        }
        let xb = self.ftran(r);
        for (p, &b) in self.basis.iter().enumerate() {
            self.x[b] = xb[p];
        }
        Ok(())
    }

    fn ftran(&self, b: Vec<f64>) -> Vec<f64> {
        let mut w = if self.m == 0 { b } else { self.lu.as_ref().expect("factorized").solve(&b) };
        for e in &self.etas {
            let wr = w[e.r] / e.pivot;
            w[e.r] = wr;
            if wr != 0.0 {
                for &(i, v) in &e.others {
                    w[i] -= v * wr;
                }
            }
        }
        w
    }

    fn btran(&self, mut c: Vec<f64>) -> Vec<f64> {
        for e in self.etas.iter().rev() {
            let mut s = c[e.r];
            for &(i, v) in &e.others {
                s -= v * c[i];
            }
            c[e.r] = s / e.pivot;
        }
        if self.m == 0 {
            c
        } else {
            self.lu.as_ref().expect("factorized").solve_transpose(&c)
        }
    }

    fn btran_costs(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&b| self.cost[b]).collect();
        self.btran(cb)
    }

    fn run_phase_one(&mut self) -> Result<(), LpError> {
        if self.artificials.is_empty() {
            return Ok(());
        }
        // Phase one cannot be unbounded: the objective is bounded below by 0.
        self.iterate(false).map(|_| ())
    }

    /// Runs simplex pivots to optimality. Returns the entering variable if an
    /// unbounded ray is found.
    fn iterate(&mut self, phase_two: bool) -> Result<Option<usize>, LpError> {
        self.refactor()?;
        let mut degenerate_run = 0usize;
        loop {
            if self.iterations >= self.budget {
                return Err(LpError::Stalled {
                    iterations: self.iterations,
                });
            }
            let bland = degenerate_run >= self.opts.degenerate_limit;
            let y = self.btran_costs();

            // Pricing.
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.total {
                if self.pos[j] != NOT_BASIC {
                    continue;
                }
                if phase_two && j >= self.n + self.m {
                    continue;
                }
                let d = self.cost[j] - self.column_dot(j, &y);
                let dir = if d < -self.opts.optimality_tol && self.x[j] < self.upper[j] {
                    1.0
                } else if d > self.opts.optimality_tol && self.x[j] > self.lower[j] {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, d, dir));
                    break;
                }
                if entering.is_none_or(|(_, best, _)| d.abs() > best.abs()) {
                    entering = Some((j, d, dir));
                }
            }
            let Some((q, _, dir)) = entering else {
                return Ok(None);
            };

            let mut aq = vec![0.0; self.m];
            self.for_column(q, |i, v| aq[i] += v);
            let w = self.ftran(aq);

            // Ratio test.
            let mut leave: Option<(usize, f64)> = None;
            for (p, &wp) in w.iter().enumerate() {
                let delta = dir * wp;
                if delta.abs() <= self.opts.pivot_tol {
                    continue;
                }
                let b = self.basis[p];
                let limit = if delta > 0.0 {
                    if self.lower[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    ((self.x[b] - self.lower[b]) / delta).max(0.0)
                } else {
                    if self.upper[b] == f64::INFINITY {
                        continue;
                    }
                    ((self.upper[b] - self.x[b]) / -delta).max(0.0)
                };
                leave = match leave {
                    None => Some((p, limit)),
                    Some((lp, best)) => {
                        let tie = (limit - best).abs() <= 1e-12 * (1.0 + best.abs());
                        let wins = if tie {
                            if bland {
                                b < self.basis[lp]
                            } else {
                                wp.abs() > w[lp].abs()
                            }
                        } else {
                            limit < best
                        };
                        if wins {
                            Some((p, limit))
                        } else {
                            Some((lp, best))
                        }
                    }
                };
            }
            let flip = self.upper[q] - self.lower[q];
            let (step, leave) = match leave {
                Some((_, limit)) if flip <= limit => (flip, None),
                Some((r, limit)) => (limit, Some(r)),
                None => (flip, None),
            };
            if step == f64::INFINITY {
                return Ok(Some(q));
            }
            self.iterations += 1;
            if step <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }

            for (p, &wp) in w.iter().enumerate() {
                if wp != 0.0 {
                    let b = self.basis[p];
                    self.x[b] -= dir * step * wp;
                }
            }
            self.x[q] += dir * step;

            match leave {
                None => {
                    // Bound flip of the entering variable.
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some(r) => {
                    let b = self.basis[r];
                    let to_lower = dir * w[r] > 0.0;
                    self.x[b] = if to_lower { self.lower[b] } else { self.upper[b] };
                    self.pos[b] = NOT_BASIC;
                    self.pos[q] = r;
                    self.basis[r] = q;
                    self.etas.push(Eta {
                        r,
                        pivot: w[r],
                        others: w
                            .iter()
                            .enumerate()
                            .filter(|&(i, &v)| i != r && v != 0.0)
                            .map(|(i, &v)| (i, v))
                            .collect(),
                    });
                    if self.etas.len() >= self.opts.refactor_interval {
                        self.refactor()?;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LinearProgram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn optimal(lp: &LinearProgram) -> LpSolution {
        match solve_lp(lp).unwrap() {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn single_lower_bound_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable(1.0, f64::NEG_INFINITY, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 3.0);
        let s = optimal(&lp);
        assert!((s.x[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.dual_objective(&lp) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn least_absolute_deviation_is_the_median() {
        // min Σ r⁺ + r⁻ with x + r⁺ − r⁻ = z_i
        let z = [1.0, 1.0, 10.0];
        let mut lp = LinearProgram::new();
        let x = lp.add_variable(0.0, f64::NEG_INFINITY, f64::INFINITY);
        for &zi in &z {
            let p = lp.add_variable(1.0, 0.0, f64::INFINITY);
            let m = lp.add_variable(1.0, 0.0, f64::INFINITY);
            lp.add_constraint(vec![(x, 1.0), (p, 1.0), (m, -1.0)], Sense::Eq, zi);
        }
        let s = optimal(&lp);
        assert!((s.x[x] - 1.0).abs() < 1e-9);
        assert!((s.objective - 9.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_rows_are_reported() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable(1.0, 0.0, 1.0);
        lp.add_constraint(vec![(x, 1.0)], Sense::Ge, 2.0);
        match solve_lp(&lp).unwrap() {
            LpOutcome::Infeasible { violated_rows } => assert_eq!(violated_rows, vec![0]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unbounded_direction_is_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable(-1.0, 0.0, f64::INFINITY);
        let y = lp.add_variable(0.0, 0.0, f64::INFINITY);
        lp.add_constraint(vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert!(matches!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded { .. }));
    }

    #[test]
    fn frequent_refactorization_gives_the_same_answer() {
        let lp = random_lp(&mut ChaCha8Rng::seed_from_u64(7), 8, 6);
        let a = optimal(&lp);
        let b = solve_lp_with(
            &lp,
            &SimplexOptions {
                refactor_interval: 1,
                ..Default::default()
            },
        )
        .unwrap()
        .optimal()
        .unwrap();
        assert!((a.objective - b.objective).abs() < 1e-9);
    }

    /// Box-bounded random LP with ≤ rows, feasible at the origin.
    pub(crate) fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> LinearProgram {
        let mut lp = LinearProgram::new();
        for _ in 0..n {
            lp.add_variable(rng.random_range(-5.0..5.0), 0.0, rng.random_range(1.0..4.0));
        }
        for _ in 0..m {
            let mut coeffs = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.6) {
                    coeffs.push((j, rng.random_range(-3.0..3.0)));
                }
            }
            lp.add_constraint(coeffs, Sense::Le, rng.random_range(0.5..6.0));
        }
        lp
    }

    /// Exhaustive vertex enumeration. A vertex fixes every variable not in a
    /// chosen "free" set at one of its bounds and makes as many rows active
    /// as there are free variables; each candidate is solved densely and
    /// kept if feasible.
    fn vertex_oracle(lp: &LinearProgram) -> f64 {
        let n = lp.num_variables();
        let m = lp.num_constraints();
        let dense: Vec<Vec<f64>> = lp
            .constraints
            .iter()
            .map(|c| {
                let mut row = vec![0.0; n];
                for &(j, v) in &c.coefficients {
                    row[j] += v;
                }
                row
            })
            .collect();
        let mut best = f64::INFINITY;
        for rows in 0u32..(1 << m) {
            let active: Vec<usize> = (0..m).filter(|i| rows >> i & 1 == 1).collect();
            let k = active.len();
            for free in 0u32..(1 << n) {
                if free.count_ones() as usize != k {
                    continue;
                }
                let free_vars: Vec<usize> = (0..n).filter(|j| free >> j & 1 == 1).collect();
                let fixed: Vec<usize> = (0..n).filter(|j| free >> j & 1 == 0).collect();
                for at_upper in 0u32..(1 << fixed.len()) {
                    let mut x = vec![0.0; n];
                    for (t, &j) in fixed.iter().enumerate() {
                        x[j] = if at_upper >> t & 1 == 1 { lp.upper[j] } else { lp.lower[j] };
                    }
                    if k > 0 {
                        let a = nalgebra::DMatrix::from_fn(k, k, |r, c| dense[active[r]][free_vars[c]]);
                        let b = nalgebra::DVector::from_fn(k, |r, _| {
                            let i = active[r];
                            lp.constraints[i].rhs - fixed.iter().map(|&j| dense[i][j] * x[j]).sum::<f64>()
                        });
                        let Some(sol) = a.lu().solve(&b) else { continue };
                        for (c, &j) in free_vars.iter().enumerate() {
                            x[j] = sol[c];
                        }
                    }
                    if lp.max_violation(&x) < 1e-9 {
                        best = best.min(lp.evaluate(&x));
                    }
                }
            }
        }
        best
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..6 {
            let lp = random_lp(&mut rng, 10, 4);
            let s = optimal(&lp);
            let oracle = vertex_oracle(&lp);
            assert!(lp.max_violation(&s.x) < 1e-7);
            assert!((s.objective - oracle).abs() < 1e-7, "{} vs {}", s.objective, oracle);
            assert!((s.dual_objective(&lp) - s.objective).abs() < 1e-6);
        }
    }
}
