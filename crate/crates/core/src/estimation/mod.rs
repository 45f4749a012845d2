//! State estimation: nonlinear AC WLS (Gauss-Newton), PMU-only linear WLS
//! in rectangular coordinates, DC WLS, with normal-equation, orthogonal and
//! Peters-Wilkinson solution paths, plus least absolute value estimation.
//!
//! A [`StateEstimator`] keeps the measurement model, the gain pattern and
//! its factorization between calls. Structural changes (measurement set
//! structure, network topology, slack) rebuild the model; value, variance
//! and status changes patch it in place.

mod lav;
mod model;
mod solve;

use crate::lp::{LpError, SimplexOptions};
use crate::measurement::{MeasurementError, MeasurementSet};
use crate::network::{NetworkError, PowerSystem};
use crate::sparse::{CscMatrix, SelectedInverse, SparseError};
use model::{BlockKind, MeasurementModel};
use serde::{Deserialize, Serialize};
use solve::{linearize, Gain, Linearization};
use thiserror::Error;

pub use crate::powerflow::Start;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Polar state `[Θ (no slack), V]`, all measurement types.
    Ac,
    /// Rectangular state `[Re V, Im V]`, phasor measurements only.
    Pmu,
    /// Angles without the slack, active power and angle measurements.
    Dc,
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ac" => Ok(Self::Ac),
            "pmu" => Ok(Self::Pmu),
            "dc" => Ok(Self::Dc),
            _ => Err(format!("unknown model `{s}` (expected ac, pmu or dc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Normal equations with the gain matrix.
    Wls,
    Orthogonal,
    PetersWilkinson,
    Lav,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "wls" | "normal" => Ok(Self::Wls),
            "orthogonal" | "qr" => Ok(Self::Orthogonal),
            "pw" | "peters-wilkinson" | "peters_wilkinson" => Ok(Self::PetersWilkinson),
            "lav" => Ok(Self::Lav),
            _ => Err(format!("unknown method `{s}` (expected wls, orthogonal, pw or lav)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationOptions {
    pub method: Method,
    /// Stop when `‖Δx‖∞` falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// `Warm` reuses the previous estimate when one exists; the first
    /// solve always starts flat.
    pub start: Start,
    pub simplex: SimplexOptions,
}

impl Default for EstimationOptions {
    fn default() -> Self {
        Self {
            method: Method::Wls,
            tolerance: 1e-8,
            max_iterations: 50,
            start: Start::Warm,
            simplex: SimplexOptions::default(),
        }
    }
}

impl EstimationOptions {
    pub fn with_method(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error("{rows} in-service measurement rows cannot determine {states} state variables")]
    Underdetermined { rows: usize, states: usize },
    #[error("unobservable: no information on {}", columns.join(", "))]
    Unobservable { columns: Vec<String> },
    #[error("no convergence within {iterations} iterations (last step {step:e})")]
    MaxIterations { iterations: usize, step: f64 },
    #[error("estimate diverged")]
    Diverged,
    #[error("linear algebra failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("least absolute value problem is {0}")]
    LavFailed(String),
}

/// What the last solve reused from earlier ones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EstimationReuse {
    pub model_rebuilt: bool,
    pub pattern_reused: bool,
    pub factor_reused: bool,
    pub warm_start: bool,
    /// Covariance blocks re-inverted after variance or status changes.
    pub patched_blocks: usize,
    pub symbolic_analyses: usize,
    pub refactorizations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowPart {
    Value,
    Real,
    Imaginary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowResidual {
    pub id: String,
    pub part: RowPart,
    pub measured: f64,
    pub estimated: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationReport {
    pub model: ModelKind,
    pub method: Method,
    pub magnitude: Vec<f64>,
    pub angle: Vec<f64>,
    /// Raw state vector in the model's own coordinates.
    pub state: Vec<f64>,
    pub iterations: usize,
    pub step_norms: Vec<f64>,
    /// In-service measurement rows `k` and state variables `m`.
    pub rows: usize,
    pub states: usize,
    /// Weighted residual sum of squares, or the sum of absolute residuals
    /// for LAV.
    pub objective: f64,
    pub residuals: Vec<RowResidual>,
    pub reuse: EstimationReuse,
}

/// Per-row quantities needed by bad-data analysis at the current estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RowDiagnostic {
    /// Measurement positions removed together with this row.
    pub members: Vec<usize>,
    pub residual: f64,
    /// Measurement variance of the row.
    pub variance: f64,
    /// Diagonal of the residual covariance `Σ − J G⁻¹ Jᵀ`.
    pub residual_variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub rows: Vec<RowDiagnostic>,
    /// `rᵀ Σ⁻¹ r` over in-service rows.
    pub statistic: f64,
    pub degrees_of_freedom: isize,
    /// Rows handled by full solves instead of the selected inverse.
    pub fallbacks: usize,
}

#[derive(Debug, Clone)]
struct Cache {
    structure: (u64, u64, u64),
    values: u64,
    model: MeasurementModel,
    gain: Option<Gain>,
    weights_epoch: u64,
    factored: Option<(u64, u64)>,
}

/// The measurement model linearized at an estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModel {
    /// Active rows × states.
    pub jacobian: CscMatrix<f64>,
    /// Block-diagonal measurement covariance over the same rows.
    pub covariance: CscMatrix<f64>,
    pub residuals: Vec<f64>,
    /// Measurement positions behind each row.
    pub members: Vec<Vec<usize>>,
}

/// A reusable estimator for one model kind.
#[derive(Debug, Clone)]
pub struct StateEstimator {
    pub kind: ModelKind,
    pub options: EstimationOptions,
    cache: Option<Cache>,
    previous: Option<Vec<f64>>,
}

impl StateEstimator {
    pub fn new(kind: ModelKind, options: EstimationOptions) -> Self {
        Self {
            kind,
            options,
            cache: None,
            previous: None,
        }
    }

    /// Forgets every cached structure and the previous estimate.
    pub fn reset(&mut self) {
        self.cache = None;
        self.previous = None;
    }

    fn keys(&self, sys: &PowerSystem, set: &MeasurementSet) -> ((u64, u64, u64), u64) {
        let r = sys.revisions();
        let (pattern, values) = match self.kind {
            ModelKind::Dc => (r.dc_pattern, r.dc_values),
            ModelKind::Ac | ModelKind::Pmu => (r.ac_pattern, r.ac_values),
        };
        ((set.revisions().structure, pattern, r.bus_kinds), values)
    }

    fn prepare(&mut self, sys: &PowerSystem, set: &MeasurementSet, reuse: &mut EstimationReuse) -> Result<(), EstimationError> {
        let (structure, values) = self.keys(sys, set);
        match &mut self.cache {
            Some(c) if c.structure == structure => {
                reuse.pattern_reused = true;
                if c.values != values {
                    if self.kind != ModelKind::Ac {
                        c.model.refresh_linear(sys, set)?;
                    }
                    c.values = values;
                }
                let patched = c.model.refresh_values(set);
                if patched > 0 {
                    c.weights_epoch += 1;
                }
                reuse.patched_blocks = patched;
            }
            _ => {
                let mut model = MeasurementModel::build(sys, set, self.kind)?;
                let flat = model.layout.flat();
                model.fix_supports(sys, &flat);
                self.cache = Some(Cache {
                    structure,
                    values,
                    model,
                    gain: None,
                    weights_epoch: 0,
                    factored: None,
                });
                reuse.model_rebuilt = true;
                if self.previous.as_ref().is_some_and(|p| p.len() != self.cache.as_ref().unwrap().model.layout.dim()) {
                    self.previous = None;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&mut self, sys: &PowerSystem, set: &MeasurementSet) -> Result<EstimationReport, EstimationError> {
        let mut reuse = EstimationReuse::default();
        self.prepare(sys, set, &mut reuse)?;
        let opts = self.options;
        let kind = self.kind;
        let cache = self.cache.as_mut().expect("prepared");
        let m = cache.model.layout.dim();
        let k = cache.model.active_rows();
        if k < m {
            return Err(EstimationError::Underdetermined { rows: k, states: m });
        }
        let linear = kind != ModelKind::Ac;
        let mut x = match (&self.previous, opts.start, linear) {
            (Some(p), Start::Warm, false) => {
                reuse.warm_start = true;
                p.clone()
            }
            (_, _, true) => vec![0.0; m],
            _ => cache.model.layout.flat(),
        };
        if kind == ModelKind::Ac && !reuse.warm_start && matches!(opts.start, Start::Case) {
            let (vm, va): (Vec<f64>, Vec<f64>) = sys.buses().iter().map(|b| (b.voltage_magnitude, b.voltage_angle)).unzip();
            x = cache.model.layout.from_polar(&vm, &va);
        }

        let mut step_norms = Vec::new();
        let mut converged = false;
        let (sym0, ref0) = cache.gain.as_ref().map_or((0, 0), |g| (g.symbolic_analyses, g.refactorizations));
        if opts.method == Method::Lav && !linear {
            (step_norms, converged) = lav::trust_region(&cache.model, sys, &mut x, &opts)?;
        }
        for _ in 0..opts.max_iterations.max(1) {
            if converged || (opts.method == Method::Lav && !linear) {
                break;
            }
            let lin = linearize(&cache.model, sys, &x);
            let dx = match opts.method {
                Method::Lav => lav::step(&cache.model, &lin, &opts.simplex, None)?.0,
                Method::Wls => {
                    if cache.gain.is_none() {
                        cache.gain = Some(Gain::new(&cache.model).map_err(numerical)?);
                    } else {
                        reuse.pattern_reused = true;
                    }
                    let gain = cache.gain.as_mut().expect("gain");
                    let rhs = gain.assemble(&cache.model, &lin);
                    let key = (cache.values, cache.weights_epoch);
                    if linear && cache.factored == Some(key) && gain.factor.is_some() {
                        reuse.factor_reused = true;
                    } else {
                        gain.factorize().map_err(|e| unobservable(&cache.model, sys, e))?;
                        let bad = gain.deficient_columns();
                        if !bad.is_empty() {
                            cache.factored = None;
                            return Err(EstimationError::Unobservable {
                                columns: bad.iter().map(|&c| cache.model.layout.column_name(sys, c)).collect(),
                            });
                        }
                        cache.factored = Some(key);
                    }
                    gain.solve(&rhs)
                }
                Method::Orthogonal | Method::PetersWilkinson => {
                    let (a, b) = solve::weighted_system(&cache.model, &lin).map_err(numerical)?;
                    let r = if opts.method == Method::Orthogonal {
                        solve::solve_orthogonal(&a, &b)
                    } else {
                        solve::solve_peters_wilkinson(&a, &b)
                    };
                    r.map_err(|e| unobservable(&cache.model, sys, e))?
                }
            };
            let norm = dx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !norm.is_finite() {
                return Err(EstimationError::Diverged);
            }
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += d;
            }
            step_norms.push(norm);
            if linear || norm < opts.tolerance {
                converged = true;
                break;
            }
        }
        if let Some(g) = &cache.gain {
            reuse.symbolic_analyses = g.symbolic_analyses - sym0;
            reuse.refactorizations = g.refactorizations - ref0;
        }
        if !converged {
            return Err(EstimationError::MaxIterations {
                iterations: step_norms.len(),
                step: *step_norms.last().unwrap_or(&f64::NAN),
            });
        }

        let lin = linearize(&cache.model, sys, &x);
        let objective = match opts.method {
            Method::Lav => lin.blocks.iter().flatten().flat_map(|b| b.residual).map(f64::abs).sum(),
            _ => weighted_sum_of_squares(&cache.model, &lin),
        };
        let residuals = row_residuals(&cache.model, set, &lin);
        let (magnitude, angle) = cache.model.layout.polar(&x);
        self.previous = Some(x.clone());
        Ok(EstimationReport {
            model: kind,
            method: opts.method,
            magnitude,
            angle,
            state: x,
            iterations: step_norms.len(),
            step_norms,
            rows: k,
            states: m,
            objective,
            residuals,
            reuse,
        })
    }

    /// Residuals, measurement variances and residual variances at the last
    /// estimate. The gain is rebuilt at that estimate and its selected
    /// inverse gives `diag(J G⁻¹ Jᵀ)`.
    pub fn diagnostics(&mut self, sys: &PowerSystem) -> Result<Diagnostics, EstimationError> {
        let x = self.previous.clone().ok_or(EstimationError::Numerical("no estimate available".into()))?;
        let cache = self.cache.as_mut().ok_or(EstimationError::Numerical("no model available".into()))?;
        let lin = linearize(&cache.model, sys, &x);
        let mut gain = match cache.gain.take() {
            Some(g) => g,
            None => Gain::new(&cache.model).map_err(numerical)?,
        };
        gain.assemble(&cache.model, &lin);
        let result = gain.factorize().map_err(|e| unobservable(&cache.model, sys, e));
        // The gain now holds the estimate's values, not the ones a linear
        // factor-reuse check would assume.
        cache.factored = None;
        let fact = result.and_then(|_| gain.factor.clone().ok_or(EstimationError::Diverged));
        cache.gain = Some(gain);
        let fact = fact?;
        let zinv = SelectedInverse::compute(&fact).map_err(numerical)?;
        let rows = solve::jacobian_rows(&cache.model, &lin);
        let vecs: Vec<_> = rows.iter().map(|(_, v)| v.clone()).collect();
        let quad = crate::sparse::diag_quadform(&fact, &zinv, &vecs);
        let mut out = Vec::with_capacity(rows.len());
        for ((r, _), q) in rows.iter().zip(&quad.values) {
            let b = &cache.model.blocks[cache.model.rows[*r].block];
            let slot = b.rows.iter().position(|v| v == r).expect("row in block");
            let variance = b.covariance[slot][slot];
            out.push(RowDiagnostic {
                members: b.members.clone(),
                residual: cache.model.residual(*r, lin.predicted[*r]),
                variance,
                residual_variance: variance - q,
            });
        }
        let k = cache.model.active_rows() as isize;
        Ok(Diagnostics {
            rows: out,
            statistic: weighted_sum_of_squares(&cache.model, &lin),
            degrees_of_freedom: k - cache.model.layout.dim() as isize,
            fallbacks: quad.fallbacks.len(),
        })
    }

    /// Jacobian, covariance and residuals over the active rows at the last
    /// estimate, in the row order of [`StateEstimator::diagnostics`].
    pub fn linearization(&self, sys: &PowerSystem) -> Result<LinearizedModel, EstimationError> {
        let x = self.previous.as_ref().ok_or(EstimationError::Numerical("no estimate available".into()))?;
        let cache = self.cache.as_ref().ok_or(EstimationError::Numerical("no model available".into()))?;
        let model = &cache.model;
        let lin = linearize(model, sys, x);
        let rows = solve::jacobian_rows(model, &lin);
        let position: std::collections::HashMap<usize, usize> = rows.iter().enumerate().map(|(k, (r, _))| (*r, k)).collect();
        let mut jac = Vec::new();
        let mut cov = Vec::new();
        let mut residuals = Vec::with_capacity(rows.len());
        let mut members = Vec::with_capacity(rows.len());
        for (k, (r, v)) in rows.iter().enumerate() {
            jac.extend(v.iter().map(|(c, d)| (k, c, d)));
            let b = &model.blocks[model.rows[*r].block];
            let slot = b.rows.iter().position(|q| q == r).expect("row in block");
            for (other_slot, other) in b.rows.iter().enumerate() {
                let value = b.covariance[slot][other_slot];
                if value != 0.0 {
                    cov.push((k, position[other], value));
                }
            }
            residuals.push(model.residual(*r, lin.predicted[*r]));
            members.push(b.members.clone());
        }
        let n = rows.len();
        Ok(LinearizedModel {
            jacobian: CscMatrix::from_triplets(n, model.layout.dim(), &jac).map_err(numerical)?,
            covariance: CscMatrix::from_triplets(n, n, &cov).map_err(numerical)?,
            residuals,
            members,
        })
    }

    /// The last estimate in the model's state coordinates.
    pub fn previous_state(&self) -> Option<&[f64]> {
        self.previous.as_deref()
    }

    /// Dimensions `(k, m)` of the current model.
    pub fn dimensions(&self) -> Option<(usize, usize)> {
        self.cache.as_ref().map(|c| (c.model.active_rows(), c.model.layout.dim()))
    }
}

fn numerical(e: SparseError) -> EstimationError {
    EstimationError::Numerical(e.to_string())
}

fn unobservable(model: &MeasurementModel, sys: &PowerSystem, e: SparseError) -> EstimationError {
    match e {
        SparseError::SingularPivot { column } | SparseError::RankDeficient { column, .. } if column < model.layout.dim() => {
            EstimationError::Unobservable {
                columns: vec![model.layout.column_name(sys, column)],
            }
        }
        other => numerical(other),
    }
}

fn weighted_sum_of_squares(model: &MeasurementModel, lin: &Linearization) -> f64 {
    lin.blocks
        .iter()
        .enumerate()
        .filter_map(|(b, l)| l.as_ref().map(|l| model.blocks[b].weigh(l.residual)))
        .map(|w| w[0] * w[0] + w[1] * w[1])
        .sum()
}

fn row_residuals(model: &MeasurementModel, set: &MeasurementSet, lin: &Linearization) -> Vec<RowResidual> {
    let ms = set.measurements();
    let mut out = Vec::new();
    for (b, blk) in model.blocks.iter().enumerate() {
        if lin.blocks[b].is_none() {
            continue;
        }
        let id = ms[blk.members[0]].id.clone();
        for (slot, &r) in blk.rows.iter().enumerate() {
            let h = lin.predicted[r];
            let (part, measured, estimated) = match blk.kind {
                BlockKind::Scalar => (RowPart::Value, blk.z[0], h),
                BlockKind::SquaredCurrent => (RowPart::Value, ms[blk.members[0]].value, h.max(0.0).sqrt()),
                _ => (
                    if slot == 0 { RowPart::Real } else { RowPart::Imaginary },
                    blk.z[slot],
                    h,
                ),
            };
            let residual = if blk.kind == BlockKind::Scalar { model.residual(r, h) } else { measured - estimated };
            out.push(RowResidual {
                id: id.clone(),
                part,
                measured,
                estimated,
                residual,
            });
        }
    }
    out
}

/// One-shot estimation with a fresh estimator.
pub fn estimate(
    sys: &PowerSystem,
    set: &MeasurementSet,
    kind: ModelKind,
    options: EstimationOptions,
) -> Result<EstimationReport, EstimationError> {
    StateEstimator::new(kind, options).solve(sys, set)
}

pub fn solve_wls_ac(sys: &PowerSystem, set: &MeasurementSet) -> Result<EstimationReport, EstimationError> {
    estimate(sys, set, ModelKind::Ac, EstimationOptions::default())
}

pub fn solve_wls_pmu(sys: &PowerSystem, set: &MeasurementSet) -> Result<EstimationReport, EstimationError> {
    estimate(sys, set, ModelKind::Pmu, EstimationOptions::default())
}

pub fn solve_wls_dc(sys: &PowerSystem, set: &MeasurementSet) -> Result<EstimationReport, EstimationError> {
    estimate(sys, set, ModelKind::Dc, EstimationOptions::default())
}

pub fn solve_lav(sys: &PowerSystem, set: &MeasurementSet, kind: ModelKind) -> Result<EstimationReport, EstimationError> {
    estimate(sys, set, kind, EstimationOptions::with_method(Method::Lav))
}
