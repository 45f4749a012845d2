//! Linear and binary integer programming.
//!
//! [`solve_lp`] is a bounded-variable revised simplex (two phases, product
//! form basis updates over the sparse LU, Dantzig pricing with a switch to
//! Bland's rule after a run of degenerate pivots). [`solve_binary_ilp`] is a
//! depth-first branch-and-bound on top of it.

mod bnb;
mod simplex;

pub use bnb::{solve_binary_ilp, IlpOptions, IlpOutcome};
pub use simplex::{solve_lp, solve_lp_with, SimplexOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min cᵀx` subject to row constraints and variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub integer: Vec<bool>,
    /// Starting values for free variables (others start at a bound).
    pub initial: Option<Vec<f64>>,
    /// Constant added to the reported objective.
    pub objective_offset: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable and returns its index.
    pub fn add_variable(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integer.push(false);
        self.objective.len() - 1
    }

    pub fn add_binary(&mut self, cost: f64) -> usize {
        let v = self.add_variable(cost, 0.0, 1.0);
        self.integer[v] = true;
        v
    }

    pub fn add_constraint(&mut self, coefficients: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.constraints.push(Constraint {
            coefficients,
            sense,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn num_variables(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n || self.integer.len() != n {
            return Err(LpError::InvalidProblem("bound/integrality arrays differ in length".into()));
        }
        for j in 0..n {
            if !(self.lower[j] <= self.upper[j]) {
                return Err(LpError::InvalidProblem(format!("variable {j} has lower > upper")));
            }
            if !self.objective[j].is_finite() || self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(LpError::InvalidProblem(format!("variable {j} has non-finite data")));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::InvalidProblem(format!("row {i} has non-finite rhs")));
            }
            for &(j, a) in &c.coefficients {
                if j >= n || !a.is_finite() {
                    return Err(LpError::InvalidProblem(format!("row {i} references bad column {j}")));
                }
            }
        }
        if let Some(init) = &self.initial {
            if init.len() != n {
                return Err(LpError::InvalidProblem("initial point has wrong length".into()));
            }
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for c in &self.constraints {
            let lhs: f64 = c.coefficients.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match c.sense {
                Sense::Le => lhs - c.rhs,
                Sense::Ge => c.rhs - lhs,
                Sense::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() + self.objective_offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row prices from the final basis, `y = B⁻ᵀ c_B`.
    pub duals: Vec<f64>,
    /// `c − Aᵀy` for the structural variables.
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    /// Dual objective `bᵀy + Σ_j d_j·(active bound of j)` reconstructed from the
    /// final basis; equals the primal objective at an optimal basis.
    pub fn dual_objective(&self, lp: &LinearProgram) -> f64 {
        let mut v: f64 = lp.constraints.iter().zip(&self.duals).map(|(c, y)| c.rhs * y).sum();
        for (j, &d) in self.reduced_costs.iter().enumerate() {
            let bound = if d > 0.0 { lp.lower[j] } else { lp.upper[j] };
            if d != 0.0 && bound.is_finite() {
                v += d * bound;
            }
        }
        v + lp.objective_offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// Rows still violated at the end of phase one.
    Infeasible { violated_rows: Vec<usize> },
    Unbounded { variable: usize },
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("invalid linear program: {0}")]
    InvalidProblem(String),
    #[error("simplex made no progress within {iterations} iterations")]
    Stalled { iterations: usize },
    #[error("numerical failure in simplex: {0}")]
    Numerical(String),
    #[error("branch-and-bound node budget of {nodes} exceeded")]
    NodeBudgetExceeded {
        nodes: usize,
        incumbent: Option<Box<LpSolution>>,
    },
}
