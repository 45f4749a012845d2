//! Quasi-steady-state sequences: timed change lists applied to one network
//! and measurement set, with every solver kept alive between steps so that
//! matrices, factorizations and previous solutions carry over.

use crate::estimation::{EstimationOptions, EstimationReport, Method as EstimationMethod, ModelKind, StateEstimator};
use crate::measurement::{MeasurementSet, MeasurementUpdate};
use crate::network::{BusId, Change, ChangeEffect, PowerSystem};
use crate::opf::{solve_dc_opf, DcOpfOptions, DcOpfReport};
use crate::powerflow::{
    DcPowerFlow, DcPowerFlowReport, FastDecoupled, FastDecoupledVariant, GaussSeidel, NewtonRaphson, PowerFlowOptions,
    PowerFlowReport, Start,
};
use crate::Error;
use serde::{Deserialize, Serialize};
use thiserror::Error as ThisError;

/// One edit in a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepChange {
    /// Multiplies active and reactive load at the listed buses (all buses
    /// when omitted).
    ScaleLoads {
        factor: f64,
        #[serde(default)]
        buses: Option<Vec<BusId>>,
    },
    /// Multiplies the active output of the listed generators (1-based; all
    /// when omitted).
    ScaleGeneration {
        factor: f64,
        #[serde(default)]
        generators: Option<Vec<usize>>,
    },
    /// Multiplies the off-nominal turns ratio of the listed branches
    /// (1-based; every transformer when omitted).
    ScaleTurnsRatios {
        factor: f64,
        #[serde(default)]
        branches: Option<Vec<usize>>,
    },
    Measurement {
        id: String,
        #[serde(default)]
        value: Option<f64>,
        #[serde(default)]
        variance: Option<f64>,
        #[serde(default)]
        in_service: Option<bool>,
    },
    #[serde(untagged)]
    Network(Change),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AcMethod {
    #[default]
    Newton,
    FastDecoupledXb,
    FastDecoupledBx,
    GaussSeidel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Analysis {
    AcPf {
        #[serde(default)]
        method: AcMethod,
    },
    DcPf,
    DcOpf,
    Estimate {
        model: ModelKind,
        #[serde(default = "default_method")]
        method: EstimationMethod,
    },
}

fn default_method() -> EstimationMethod {
    EstimationMethod::Wls
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Step {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub changes: Vec<StepChange>,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
}

/// A script is either `{"steps": [...]}` or a bare list of steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(from = "ScriptDocument")]
pub struct ChangeScript {
    pub steps: Vec<Step>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptDocument {
    List(Vec<Step>),
    Object { steps: Vec<Step> },
}

impl From<ScriptDocument> for ChangeScript {
    fn from(d: ScriptDocument) -> Self {
        match d {
            ScriptDocument::List(steps) | ScriptDocument::Object { steps } => ChangeScript { steps },
        }
    }
}

impl ChangeScript {
    pub fn from_json(text: &str) -> Result<Self, QssError> {
        serde_json::from_str(text).map_err(|e| QssError::Script(e.to_string()))
    }
}

#[derive(Debug, ThisError)]
pub enum QssError {
    #[error("script: {0}")]
    Script(String),
    #[error("step {step}: measurement changes need a measurement set")]
    NoMeasurements { step: usize },
    #[error("step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl QssError {
    pub fn is_input_error(&self) -> bool {
        match self {
            QssError::Script(_) | QssError::NoMeasurements { .. } => true,
            QssError::Step { source, .. } => source.is_input_error(),
        }
    }
}

/// What an analysis took over from earlier steps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepReuse {
    /// The system matrix (admittance, susceptance or measurement Jacobian
    /// structure) was updated in place rather than rebuilt.
    pub matrix_reused: bool,
    pub pattern_reused: bool,
    pub factor_reused: bool,
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "report", rename_all = "snake_case")]
pub enum AnalysisResult {
    AcPf(PowerFlowReport),
    DcPf(DcPowerFlowReport),
    DcOpf(DcOpfReport),
    Estimate(EstimationReport),
}

impl AnalysisResult {
    /// The solved state: magnitudes then angles for AC results, angles (and
    /// dispatch for OPF) otherwise.
    pub fn state(&self) -> Vec<f64> {
        match self {
            AnalysisResult::AcPf(r) => r.magnitude.iter().chain(&r.angle).copied().collect(),
            AnalysisResult::DcPf(r) => r.angle.clone(),
            AnalysisResult::DcOpf(r) => r.angle.iter().chain(&r.dispatch).copied().collect(),
            AnalysisResult::Estimate(r) => r.magnitude.iter().chain(&r.angle).copied().collect(),
        }
    }

    /// Largest absolute state difference; `None` when shapes differ.
    pub fn max_difference(&self, other: &AnalysisResult) -> Option<f64> {
        let (a, b) = (self.state(), other.state());
        (a.len() == b.len() && std::mem::discriminant(self) == std::mem::discriminant(other))
            .then(|| a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
    }

    pub fn iterations(&self) -> usize {
        match self {
            AnalysisResult::AcPf(r) => r.iterations,
            AnalysisResult::DcPf(_) => 1,
            AnalysisResult::DcOpf(r) => r.iterations,
            AnalysisResult::Estimate(r) => r.iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisOutcome {
    pub analysis: Analysis,
    pub reuse: StepReuse,
    pub result: AnalysisResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub step: usize,
    pub label: Option<String>,
    pub effect: ChangeEffect,
    pub measurement_changes: usize,
    pub analyses: Vec<AnalysisOutcome>,
}

/// Settings shared by every solver a runner drives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QssOptions {
    /// Convergence tolerance of the iterative power flows and estimators.
    pub tolerance: f64,
}

impl Default for QssOptions {
    fn default() -> Self {
        Self {
            tolerance: crate::powerflow::DEFAULT_TOLERANCE,
        }
    }
}

fn estimator_in(list: &mut Vec<StateEstimator>, kind: ModelKind, method: EstimationMethod, tolerance: f64) -> &mut StateEstimator {
    let pos = match list.iter().position(|e| e.kind == kind && e.options.method == method) {
        Some(p) => p,
        None => {
            let options = EstimationOptions {
                tolerance,
                ..EstimationOptions::with_method(method)
            };
            list.push(StateEstimator::new(kind, options));
            list.len() - 1
        }
    };
    &mut list[pos]
}

/// Runs steps against an owned network and measurement set.
pub struct QssRunner {
    pub network: PowerSystem,
    pub measurements: Option<MeasurementSet>,
    options: QssOptions,
    /// Reset every solver before each analysis and start AC power flow
    /// flat (the cold-run oracle).
    cold: bool,
    newton: NewtonRaphson,
    xb: FastDecoupled,
    bx: FastDecoupled,
    gauss: GaussSeidel,
    dc: DcPowerFlow,
    estimators: Vec<StateEstimator>,
    next_step: usize,
}

impl QssRunner {
    pub fn new(network: PowerSystem, measurements: Option<MeasurementSet>, options: QssOptions) -> Self {
        let tolerance = options.tolerance;
        let newton = PowerFlowOptions {
            tolerance,
            ..PowerFlowOptions::newton()
        };
        let mut xb = FastDecoupled::new(FastDecoupledVariant::Xb);
        let mut bx = FastDecoupled::new(FastDecoupledVariant::Bx);
        xb.options = PowerFlowOptions {
            max_iterations: 200,
            ..newton
        };
        bx.options = xb.options;
        Self {
            network,
            measurements,
            options,
            cold: false,
            newton: NewtonRaphson::new(newton),
            xb,
            bx,
            gauss: GaussSeidel::new(PowerFlowOptions {
                tolerance,
                ..PowerFlowOptions::gauss_seidel()
            }),
            dc: DcPowerFlow::new(),
            estimators: Vec::new(),
            next_step: 0,
        }
    }

    /// A runner that discards all cached work before every analysis.
    pub fn cold(network: PowerSystem, measurements: Option<MeasurementSet>, options: QssOptions) -> Self {
        Self {
            cold: true,
            ..Self::new(network, measurements, options)
        }
    }

    fn expand(&self, change: &StepChange) -> Vec<Change> {
        let sys = &self.network;
        match change {
            StepChange::ScaleLoads { factor, buses } => sys
                .buses()
                .iter()
                .filter(|b| buses.as_ref().is_none_or(|l| l.contains(&b.id)))
                .map(|b| Change::BusLoad {
                    bus: b.id,
                    active: Some(b.active_load * factor),
                    reactive: Some(b.reactive_load * factor),
                })
                .collect(),
            StepChange::ScaleGeneration { factor, generators } => sys
                .generators()
                .iter()
                .enumerate()
                .filter(|(k, _)| generators.as_ref().is_none_or(|l| l.contains(&(k + 1))))
                .map(|(k, g)| Change::GeneratorOutput {
                    generator: k + 1,
                    active: Some(g.active_power * factor),
                    reactive: None,
                })
                .collect(),
            StepChange::ScaleTurnsRatios { factor, branches } => sys
                .branches()
                .iter()
                .enumerate()
                .filter(|(k, b)| match branches {
                    Some(l) => l.contains(&(k + 1)),
                    None => b.turns_ratio != 1.0,
                })
                .map(|(k, b)| Change::BranchParameters {
                    branch: k + 1,
                    resistance: None,
                    reactance: None,
                    shunt_conductance: None,
                    shunt_susceptance: None,
                    turns_ratio: Some(b.turns_ratio * factor),
                    phase_shift: None,
                })
                .collect(),
            StepChange::Network(c) => vec![c.clone()],
            StepChange::Measurement { .. } => Vec::new(),
        }
    }

    fn analyze(&mut self, analysis: Analysis) -> Result<AnalysisOutcome, Error> {
        let cold = self.cold;
        let start = if cold { Start::Flat } else { Start::Warm };
        let sys = &self.network;
        let (result, reuse) = match analysis {
            Analysis::AcPf { method } => {
                let solver_report = match method {
                    AcMethod::Newton => {
                        if cold {
                            self.newton.reset();
                        }
                        self.newton.solve(sys, start)?
                    }
                    AcMethod::FastDecoupledXb | AcMethod::FastDecoupledBx => {
                        let s = if method == AcMethod::FastDecoupledXb { &mut self.xb } else { &mut self.bx };
                        if cold {
                            s.reset();
                        }
                        s.solve(sys, start)?
                    }
                    AcMethod::GaussSeidel => {
                        if cold {
                            self.gauss.reset();
                        }
                        self.gauss.solve(sys, start)?
                    }
                };
                let r = solver_report.reuse;
                let reuse = StepReuse {
                    matrix_reused: r.pattern_reused,
                    pattern_reused: r.pattern_reused,
                    factor_reused: r.factor_reused,
                    warm_start: r.warm_start,
                };
                (AnalysisResult::AcPf(solver_report), reuse)
            }
            Analysis::DcPf => {
                if cold {
                    self.dc.reset();
                }
                let report = self.dc.solve(sys)?;
                let r = report.reuse;
                let reuse = StepReuse {
                    matrix_reused: r.pattern_reused,
                    pattern_reused: r.pattern_reused,
                    factor_reused: r.factor_reused,
                    warm_start: false,
                };
                (AnalysisResult::DcPf(report), reuse)
            }
            Analysis::DcOpf => (AnalysisResult::DcOpf(solve_dc_opf(sys, &DcOpfOptions::default())?), StepReuse::default()),
            Analysis::Estimate { model, method } => {
                let set = self.measurements.as_ref().ok_or(QssError::NoMeasurements { step: self.next_step - 1 })?;
                let est = estimator_in(&mut self.estimators, model, method, self.options.tolerance);
                if cold {
                    est.reset();
                }
                let out = est.solve(sys, set);
                let report = out?;
                let r = report.reuse;
                let reuse = StepReuse {
                    matrix_reused: !r.model_rebuilt,
                    pattern_reused: r.pattern_reused,
                    factor_reused: r.factor_reused,
                    warm_start: r.warm_start,
                };
                (AnalysisResult::Estimate(report), reuse)
            }
        };
        Ok(AnalysisOutcome { analysis, reuse, result })
    }

    /// Applies a step's changes and runs its analyses.
    pub fn run_step(&mut self, step: &Step) -> Result<StepReport, QssError> {
        let index = self.next_step;
        self.next_step += 1;
        let wrap = |e: Error| QssError::Step {
            step: index,
            source: Box::new(e),
        };
        let mut changes = Vec::new();
        let mut measurement_changes = 0;
        for c in &step.changes {
            if let StepChange::Measurement {
                id,
                value,
                variance,
                in_service,
            } = c
            {
                let set = self.measurements.as_mut().ok_or(QssError::NoMeasurements { step: index })?;
                let update = MeasurementUpdate {
                    value: *value,
                    variance: *variance,
                    in_service: *in_service,
                };
                set.update(id, &update).map_err(|e| wrap(e.into()))?;
                measurement_changes += 1;
            } else {
                changes.extend(self.expand(c));
            }
        }
        let effect = self.network.apply_all(&changes).map_err(|e| wrap(e.into()))?;
        let mut analyses = Vec::with_capacity(step.analyses.len());
        for &a in &step.analyses {
            log::debug!("step {index}: {a:?}");
            analyses.push(self.analyze(a).map_err(wrap)?);
        }
        Ok(StepReport {
            step: index,
            label: step.label.clone(),
            effect,
            measurement_changes,
            analyses,
        })
    }

    pub fn run(&mut self, script: &ChangeScript) -> Result<Vec<StepReport>, QssError> {
        script.steps.iter().map(|s| self.run_step(s)).collect()
    }
}

/// Runs a script with full reuse between steps.
pub fn run_script(
    network: PowerSystem,
    measurements: Option<MeasurementSet>,
    script: &ChangeScript,
    options: &QssOptions,
) -> Result<Vec<StepReport>, QssError> {
    QssRunner::new(network, measurements, *options).run(script)
}

/// Runs a script with every solver rebuilt from scratch at every step.
pub fn run_script_cold(
    network: PowerSystem,
    measurements: Option<MeasurementSet>,
    script: &ChangeScript,
    options: &QssOptions,
) -> Result<Vec<StepReport>, QssError> {
    QssRunner::cold(network, measurements, *options).run(script)
}
