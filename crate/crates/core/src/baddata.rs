//! Bad-data detection (chi-squared test) and identification with the
//! largest normalized residual test, removing one measurement per pass.

use crate::estimation::{Diagnostics, EstimationError, EstimationReport, Method, StateEstimator};
use crate::measurement::MeasurementSet;
use crate::network::PowerSystem;
use crate::stats::chi_squared_quantile;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_CONFIDENCE: f64 = 0.95;
pub const DEFAULT_THRESHOLD: f64 = 3.0;
/// Rows whose residual variance falls below this fraction of the
/// measurement variance are treated as critical.
pub const CRITICAL_FLOOR: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BadDataError {
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error("no redundancy: {rows} rows for {states} states")]
    NoRedundancy { rows: usize, states: usize },
    #[error("bad-data analysis needs a weighted least-squares estimator")]
    NotWeightedLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquared {
    pub statistic: f64,
    pub threshold: f64,
    pub degrees_of_freedom: usize,
    pub confidence: f64,
    pub passed: bool,
}

pub fn chi_squared_test(diag: &Diagnostics, confidence: f64) -> Result<ChiSquared, BadDataError> {
    if diag.degrees_of_freedom <= 0 {
        let rows = diag.rows.len();
        return Err(BadDataError::NoRedundancy {
            rows,
            states: (rows as isize - diag.degrees_of_freedom) as usize,
        });
    }
    let dof = diag.degrees_of_freedom as usize;
    let threshold = chi_squared_quantile(confidence, dof as f64);
    Ok(ChiSquared {
        statistic: diag.statistic,
        threshold,
        degrees_of_freedom: dof,
        confidence,
        passed: diag.statistic <= threshold,
    })
}

/// Normalized residuals `|r_i| / √C_ii` per diagnostic row; critical rows
/// get `None`.
pub fn normalized_residuals(diag: &Diagnostics) -> Vec<Option<f64>> {
    diag.rows
        .iter()
        .map(|r| (r.residual_variance > CRITICAL_FLOOR * r.variance).then(|| r.residual.abs() / r.residual_variance.sqrt()))
        .collect()
}

/// Row with the largest normalized residual (lowest index on ties).
pub fn largest_normalized_residual(diag: &Diagnostics) -> Option<(usize, f64)> {
    normalized_residuals(diag)
        .into_iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BadDataOptions {
    pub confidence: f64,
    pub threshold: f64,
    /// Run the residual test even when the chi-squared test passes.
    pub force: bool,
}

impl Default for BadDataOptions {
    fn default() -> Self {
        Self {
            confidence: DEFAULT_CONFIDENCE,
            threshold: DEFAULT_THRESHOLD,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Removal {
    pub pass: usize,
    /// Ids taken out of service (both halves of a phasor pair).
    pub ids: Vec<String>,
    pub residual: f64,
    pub normalized_residual: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// The chi-squared test passed and the residual test was skipped.
    Passed,
    /// Every normalized residual is below the threshold.
    Clean,
    /// Removing the next suspect would leave the model unobservable; it
    /// was restored and the loop stopped.
    StoppedUnobservable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadDataReport {
    pub initial: ChiSquared,
    pub removals: Vec<Removal>,
    /// Ids of critical measurements seen in any pass.
    pub critical: Vec<String>,
    pub final_test: ChiSquared,
    pub verdict: Verdict,
    pub estimate: EstimationReport,
}

/// Estimates, tests and removes bad data until the largest normalized
/// residual falls below the threshold. Removed measurements are set out of
/// service in `set`; the estimator keeps its model and masks them.
pub fn run_bad_data(
    sys: &PowerSystem,
    set: &mut MeasurementSet,
    estimator: &mut StateEstimator,
    options: &BadDataOptions,
) -> Result<BadDataReport, BadDataError> {
    if estimator.options.method == Method::Lav {
        return Err(BadDataError::NotWeightedLeastSquares);
    }
    let mut estimate = estimator.solve(sys, set)?;
    let mut diag = estimator.diagnostics(sys)?;
    let initial = chi_squared_test(&diag, options.confidence)?;
    let mut removals = Vec::new();
    let mut critical: Vec<String> = Vec::new();
    if initial.passed && !options.force {
        return Ok(BadDataReport {
            initial,
            removals,
            critical,
            final_test: initial,
            verdict: Verdict::Passed,
            estimate,
        });
    }
    let ids = |members: &[usize], set: &MeasurementSet| -> Vec<String> {
        members.iter().map(|&p| set.measurements()[p].id.clone()).collect()
    };
    let budget = set.len();
    let mut verdict = Verdict::Clean;
    for pass in 1..=budget {
        for (row, v) in diag.rows.iter().zip(normalized_residuals(&diag)) {
            if v.is_none() {
                for id in ids(&row.members, set) {
                    if !critical.contains(&id) {
                        critical.push(id);
                    }
                }
            }
        }
        let Some((j, value)) = largest_normalized_residual(&diag) else { break };
        if value < options.threshold {
            break;
        }
        let row = diag.rows[j].clone();
        for &p in &row.members {
            set.set_status(p, false);
        }
        match estimator.solve(sys, set) {
            Ok(e) => estimate = e,
            Err(EstimationError::Unobservable { .. } | EstimationError::Underdetermined { .. }) => {
                for &p in &row.members {
                    set.set_status(p, true);
                }
                estimate = estimator.solve(sys, set)?;
                diag = estimator.diagnostics(sys)?;
                verdict = Verdict::StoppedUnobservable;
                break;
            }
            Err(e) => return Err(e.into()),
        }
        removals.push(Removal {
            pass,
            ids: ids(&row.members, set),
            residual: row.residual,
            normalized_residual: value,
            threshold: options.threshold,
        });
        diag = estimator.diagnostics(sys)?;
    }
    let final_test = chi_squared_test(&diag, options.confidence)?;
    Ok(BadDataReport {
        initial,
        removals,
        critical,
        final_test,
        verdict,
        estimate,
    })
}
