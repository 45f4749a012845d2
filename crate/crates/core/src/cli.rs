//! The `gridstate` command-line front end.
//!
//! Every subcommand writes a JSON report (see [`crate::report`]) to
//! `--output` or stdout. Exit status is 0 on success, 1 when a well-posed
//! analysis fails (divergence, infeasibility, unobservability) and 2 for
//! bad input or usage errors. `GRIDSTATE_LOG` sets log verbosity
//! (`error` … `trace`, env_logger syntax).

use crate::baddata::{run_bad_data, BadDataOptions};
use crate::estimation::{EstimationOptions, Method as EstimationMethod, ModelKind, StateEstimator};
use crate::io::{measurements_from_csv, measurements_to_csv, parse_matpower, snapshot_from_json, snapshot_to_json, to_network, CaseFile};
use crate::measurement::{generate_from_solution, Coordinates, MeasurementSet, MeasurementTemplate, Solution};
use crate::network::{BusId, PowerSystem};
use crate::observability::{
    find_flow_islands, find_maximal_islands, place_pmus, restore_observability, transfer_pseudo_measurements, PlacementOptions,
    PseudoMeasurement, DEFAULT_PIVOT_THRESHOLD,
};
use crate::opf::{linearize_costs, solve_dc_opf, DcOpfOptions};
use crate::powerflow::{
    DcPowerFlow, FastDecoupled, FastDecoupledVariant, GaussSeidel, NewtonRaphson, PowerFlowOptions, PowerFlowReport, Start,
    DEFAULT_TOLERANCE,
};
use crate::qss::{ChangeScript, QssOptions, QssRunner};
use crate::report::{ErrorKind, InputFile, Report};
use crate::Error;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "gridstate", version, about = "Power flow, DC OPF, observability, PMU placement, state estimation and bad data analysis")]
struct Cli {
    /// Write the JSON report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Also print a human-readable summary to stderr.
    #[arg(long, global = true)]
    table: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// AC power flow.
    Pf(PfArgs),
    /// DC power flow.
    Dcpf(CaseArg),
    /// DC optimal power flow.
    #[command(name = "opf-dc")]
    OpfDc(OpfArgs),
    /// Generate a measurement set from a power flow solution.
    Measure(MeasureArgs),
    /// Observable islands and optional restoration with pseudo-measurements.
    Observe(ObserveArgs),
    /// Minimum PMU placement for full observability.
    #[command(name = "pmu-place")]
    PmuPlace(PmuArgs),
    /// State estimation.
    Se(SeArgs),
    /// State estimation followed by chi-squared detection and largest
    /// normalized residual identification.
    Baddata(BadDataArgs),
    /// Run a quasi-steady-state change script.
    Qss(QssArgs),
    /// Convert a case to a JSON snapshot (or a snapshot back to `.m`).
    Convert(ConvertArgs),
}

#[derive(Debug, Args, Serialize)]
struct CaseArg {
    /// MATPOWER `.m` case or JSON snapshot.
    case: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum PfMethod {
    Newton,
    Fdxb,
    Fdbx,
    Gs,
}

#[derive(Debug, Args, Serialize)]
struct PfArgs {
    case: PathBuf,
    #[arg(long, value_enum, default_value = "newton")]
    method: PfMethod,
    /// Start from a flat profile instead of the case voltages.
    #[arg(long)]
    flat: bool,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[arg(long)]
    max_iterations: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
struct OpfArgs {
    case: PathBuf,
    /// Replace polynomial costs by this many linear segments.
    #[arg(long)]
    segments: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    Ac,
    Pmu,
    Dc,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Ac => ModelKind::Ac,
            ModelArg::Pmu => ModelKind::Pmu,
            ModelArg::Dc => ModelKind::Dc,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    Wls,
    Orthogonal,
    Pw,
    Lav,
}

impl From<MethodArg> for EstimationMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Wls => EstimationMethod::Wls,
            MethodArg::Orthogonal => EstimationMethod::Orthogonal,
            MethodArg::Pw => EstimationMethod::PetersWilkinson,
            MethodArg::Lav => EstimationMethod::Lav,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum CoordinatesArg {
    Polar,
    Rect,
}

impl From<CoordinatesArg> for Coordinates {
    fn from(c: CoordinatesArg) -> Self {
        match c {
            CoordinatesArg::Polar => Coordinates::Polar,
            CoordinatesArg::Rect => Coordinates::Rectangular,
        }
    }
}

#[derive(Debug, Args, Serialize)]
struct MeasureArgs {
    case: PathBuf,
    /// `ac` solves Newton-Raphson power flow first, `dc` a DC power flow.
    #[arg(long, value_enum, default_value = "ac")]
    model: ModelArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the set as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Comma-separated bus ids with a PMU.
    #[arg(long, value_delimiter = ',')]
    pmu: Vec<BusId>,
    /// Only phasors at the `--pmu` buses.
    #[arg(long)]
    pmu_only: bool,
    /// Probability of including each injection and to-side flow.
    #[arg(long, default_value_t = 0.5)]
    inclusion: f64,
    #[arg(long)]
    no_reactive: bool,
    #[arg(long)]
    current_magnitude: bool,
    /// No noise.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    legacy_variance: Option<f64>,
    #[arg(long)]
    phasor_variance: Option<f64>,
    #[arg(long, value_enum)]
    coordinates: Option<CoordinatesArg>,
}

#[derive(Debug, Args, Serialize)]
struct ObserveArgs {
    case: PathBuf,
    /// Measurement CSV (or snapshot with measurements).
    measurements: PathBuf,
    /// JSON list of candidate pseudo-measurements.
    #[arg(long)]
    pseudo: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PIVOT_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args, Serialize)]
struct PmuArgs {
    case: PathBuf,
    /// Legacy measurements to account for.
    #[arg(long)]
    legacy: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct EstimationArgs {
    #[arg(long, value_enum, default_value = "ac")]
    model: ModelArg,
    #[arg(long, value_enum, default_value = "wls")]
    method: MethodArg,
    /// Treat every phasor in these coordinates.
    #[arg(long, value_enum)]
    coordinates: Option<CoordinatesArg>,
    /// Drop (true) or keep (false) the real/imaginary covariance of
    /// rectangular phasors.
    #[arg(long)]
    neglect_covariance: Option<bool>,
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    #[arg(long, default_value_t = 50)]
    max_iterations: usize,
}

#[derive(Debug, Args, Serialize)]
struct SeArgs {
    case: PathBuf,
    measurements: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    estimation: EstimationArgs,
}

#[derive(Debug, Args, Serialize)]
struct BadDataArgs {
    case: PathBuf,
    measurements: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    estimation: EstimationArgs,
    #[arg(long, default_value_t = crate::baddata::DEFAULT_CONFIDENCE)]
    confidence: f64,
    /// Normalized residual identification threshold.
    #[arg(long, default_value_t = crate::baddata::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Run identification even when the chi-squared test passes.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args, Serialize)]
struct QssArgs {
    case: PathBuf,
    #[arg(long)]
    script: PathBuf,
    #[arg(long)]
    measurements: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Debug, Args, Serialize)]
struct ConvertArgs {
    case: PathBuf,
    /// Output path; `.json` writes a snapshot, `.m` a MATPOWER case.
    #[arg(long)]
    to: PathBuf,
    /// Measurements to embed in the snapshot.
    #[arg(long)]
    measurements: Option<PathBuf>,
}

/// Files read during a run, for the report digest.
#[derive(Default)]
struct Inputs {
    files: Vec<InputFile>,
}

impl Inputs {
    fn read(&mut self, path: &Path) -> Result<String, Error> {
        let text = crate::io::read_text(path)?;
        self.files.push(InputFile::new(path.display().to_string(), text.as_bytes()));
        Ok(text)
    }

    fn network(&mut self, path: &Path) -> Result<PowerSystem, Error> {
        let text = self.read(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(snapshot_from_json(&text)?.network)
        } else {
            Ok(to_network(&parse_matpower(&text)?)?)
        }
    }

    fn measurements(&mut self, path: &Path) -> Result<MeasurementSet, Error> {
        let text = self.read(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            snapshot_from_json(&text)?.measurements.ok_or_else(|| {
                Error::Io(crate::io::IoError::Malformed(format!("{} holds no measurements", path.display())))
            })
        } else {
            Ok(measurements_from_csv(&text)?)
        }
    }
}

struct Outcome {
    results: Value,
    table: String,
    /// Analysis completed but its verdict is a failure (exit 1).
    failed: bool,
}

impl Outcome {
    fn ok<T: Serialize>(results: &T, table: String) -> Self {
        Self {
            results: serde_json::to_value(results).expect("results serialize"),
            table,
            failed: false,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("options serialize")
}

fn pf_table(r: &PowerFlowReport, sys: &PowerSystem) -> String {
    let mut t = format!("{:>6} {:>9} {:>10} {:>10} {:>10}\n", "bus", "|V| pu", "angle deg", "P pu", "Q pu");
    for (k, b) in sys.buses().iter().enumerate() {
        let _ = writeln!(
            t,
            "{:>6} {:>9.5} {:>10.4} {:>10.5} {:>10.5}",
            b.id,
            r.magnitude[k],
            r.angle[k].to_degrees(),
            r.active_injection[k],
            r.reactive_injection[k]
        );
    }
    let _ = writeln!(t, "converged in {} iterations", r.iterations);
    t
}

fn angle_table(sys: &PowerSystem, magnitude: Option<&[f64]>, angle: &[f64]) -> String {
    let mut t = format!("{:>6} {:>9} {:>10}\n", "bus", "|V| pu", "angle deg");
    for (k, b) in sys.buses().iter().enumerate() {
        let v = magnitude.map_or(1.0, |m| m[k]);
        let _ = writeln!(t, "{:>6} {:>9.5} {:>10.4}", b.id, v, angle[k].to_degrees());
    }
    t
}

fn ac_solve(sys: &PowerSystem, args: &PfArgs) -> Result<PowerFlowReport, Error> {
    let start = if args.flat { Start::Flat } else { Start::Case };
    let mut options = match args.method {
        PfMethod::Gs => PowerFlowOptions::gauss_seidel(),
        _ => PowerFlowOptions::newton(),
    };
    options.tolerance = args.tolerance;
    if let Some(m) = args.max_iterations {
        options.max_iterations = m;
    }
    let report = match args.method {
        PfMethod::Newton => NewtonRaphson::new(options).solve(sys, start)?,
        PfMethod::Fdxb | PfMethod::Fdbx => {
            let variant = if matches!(args.method, PfMethod::Fdxb) { FastDecoupledVariant::Xb } else { FastDecoupledVariant::Bx };
            let mut s = FastDecoupled::new(variant);
            s.options = options;
            s.solve(sys, start)?
        }
        PfMethod::Gs => GaussSeidel::new(options).solve(sys, start)?,
    };
    Ok(report)
}

fn estimation_setup(set: MeasurementSet, args: &EstimationArgs) -> Result<(MeasurementSet, StateEstimator), Error> {
    let set = if args.coordinates.is_some() || args.neglect_covariance.is_some() {
        let mut list = set.measurements().to_vec();
        for m in list.iter_mut().filter(|m| m.kind.is_phasor()) {
            if let Some(c) = args.coordinates {
                m.coordinates = Some(c.into());
            }
            if let Some(n) = args.neglect_covariance {
                m.neglect_covariance = n;
            }
        }
        MeasurementSet::new(list)?
    } else {
        set
    };
    let options = EstimationOptions {
        tolerance: args.tolerance,
        max_iterations: args.max_iterations,
        ..EstimationOptions::with_method(args.method.into())
    };
    Ok((set, StateEstimator::new(args.model.into(), options)))
}

fn execute(command: &Command, inputs: &mut Inputs) -> Result<Outcome, Error> {
    match command {
        Command::Pf(a) => {
            let sys = inputs.network(&a.case)?;
            let r = ac_solve(&sys, a)?;
            Ok(Outcome::ok(&r, pf_table(&r, &sys)))
        }
        Command::Dcpf(a) => {
            let sys = inputs.network(&a.case)?;
            let r = DcPowerFlow::new().solve(&sys)?;
            Ok(Outcome::ok(&r, angle_table(&sys, None, &r.angle)))
        }
        Command::OpfDc(a) => {
            let mut sys = inputs.network(&a.case)?;
            if let Some(s) = a.segments {
                sys = linearize_costs(&sys, s)?;
            }
            let r = solve_dc_opf(&sys, &DcOpfOptions::default())?;
            let mut t = format!("objective {:.6}\n{:>6} {:>10}\n", r.objective, "gen", "P pu");
            for (k, p) in r.dispatch.iter().enumerate() {
                let _ = writeln!(t, "{:>6} {:>10.5}", k + 1, p);
            }
            Ok(Outcome::ok(&r, t))
        }
        Command::Measure(a) => {
            let sys = inputs.network(&a.case)?;
            let base = match a.model {
                ModelArg::Dc => MeasurementTemplate::dc(),
                _ if a.pmu_only => MeasurementTemplate::pmu_only(a.pmu.clone()),
                _ => MeasurementTemplate::default(),
            };
            let mut t = MeasurementTemplate {
                pmu_buses: a.pmu.clone(),
                exact: a.exact,
                current_magnitude: a.current_magnitude,
                ..base
            };
            if !a.pmu_only {
                t.inclusion_probability = a.inclusion;
            }
            if a.no_reactive {
                t.reactive = false;
            }
            if let Some(v) = a.legacy_variance {
                t.legacy_variance = v;
            }
            if let Some(v) = a.phasor_variance {
                t.phasor_variance = v;
            }
            if let Some(c) = a.coordinates {
                t.coordinates = c.into();
            }
            let set = match a.model {
                ModelArg::Dc => {
                    let pf = DcPowerFlow::new().solve(&sys)?;
                    generate_from_solution(&sys, Solution::Dc(&pf.angle), &t, a.seed)?
                }
                _ => {
                    let pf = NewtonRaphson::default().solve(&sys, Start::Case)?;
                    generate_from_solution(&sys, Solution::Ac(&pf.state()), &t, a.seed)?
                }
            };
            if let Some(path) = &a.csv {
                crate::io::write_measurements_csv(path, &set)?;
            }
            let mut counts = std::collections::BTreeMap::new();
            for m in set.measurements() {
                *counts.entry(m.kind.name()).or_insert(0usize) += 1;
            }
            let mut table = String::new();
            for (k, c) in &counts {
                let _ = writeln!(table, "{k:>12} {c:>6}");
            }
            let results = json!({
                "count": set.len(),
                "by_kind": counts,
                "csv": measurements_to_csv(&set),
            });
            Ok(Outcome::ok(&results, table))
        }
        Command::Observe(a) => {
            let sys = inputs.network(&a.case)?;
            let mut set = inputs.measurements(&a.measurements)?;
            let flow = find_flow_islands(&sys, &set);
            let maximal = find_maximal_islands(&sys, &set);
            let mut table = format!("flow islands {}, maximal islands {}\n", flow.len(), maximal.len());
            let mut results = json!({
                "flow_islands": flow,
                "maximal_islands": maximal,
                "observable": maximal.is_observable(),
            });
            let mut failed = false;
            if let Some(path) = &a.pseudo {
                let text = inputs.read(path)?;
                let candidates: Vec<PseudoMeasurement> = serde_json::from_str(&text)
                    .map_err(|e| Error::Io(crate::io::IoError::Malformed(format!("{}: {e}", path.display()))))?;
                let r = restore_observability(&sys, &maximal, &set, &candidates, a.threshold)?;
                let ids = transfer_pseudo_measurements(&mut set, &candidates, &r.selected)?;
                let after = find_maximal_islands(&sys, &set);
                failed = !after.is_observable();
                let _ = writeln!(table, "selected pseudo-measurements {:?}; observable afterwards: {}", r.selected, after.is_observable());
                results["restoration"] = json!({
                    "selected": r.selected,
                    "retained": r.retained,
                    "pivots": r.pivots,
                    "added_ids": ids,
                    "observable_after": after.is_observable(),
                });
            }
            for (k, island) in maximal.islands.iter().enumerate() {
                let _ = writeln!(table, "island {}: {:?}", k + 1, island);
            }
            Ok(Outcome { results, table, failed })
        }
        Command::PmuPlace(a) => {
            let sys = inputs.network(&a.case)?;
            let legacy = a.legacy.as_ref().map(|p| inputs.measurements(p)).transpose()?;
            let options = PlacementOptions {
                legacy: legacy.as_ref(),
                ..Default::default()
            };
            let r = place_pmus(&sys, &options)?;
            let table = format!("{} PMUs at buses {:?}\n", r.buses.len(), r.buses);
            Ok(Outcome::ok(&r, table))
        }
        Command::Se(a) => {
            let sys = inputs.network(&a.case)?;
            let set = inputs.measurements(&a.measurements)?;
            let (set, mut est) = estimation_setup(set, &a.estimation)?;
            let r = est.solve(&sys, &set)?;
            let mut table = angle_table(&sys, Some(&r.magnitude), &r.angle);
            let _ = writeln!(table, "{} rows, {} states, {} iterations, objective {:.6e}", r.rows, r.states, r.iterations, r.objective);
            Ok(Outcome::ok(&r, table))
        }
        Command::Baddata(a) => {
            let sys = inputs.network(&a.case)?;
            let set = inputs.measurements(&a.measurements)?;
            let (mut set, mut est) = estimation_setup(set, &a.estimation)?;
            let options = BadDataOptions {
                confidence: a.confidence,
                threshold: a.threshold,
                force: a.force,
            };
            let r = run_bad_data(&sys, &mut set, &mut est, &options)?;
            let mut table = format!(
                "chi-squared {:.4} vs {:.4} ({} dof): {}\n",
                r.initial.statistic,
                r.initial.threshold,
                r.initial.degrees_of_freedom,
                if r.initial.passed { "pass" } else { "fail" }
            );
            for m in &r.removals {
                let _ = writeln!(table, "pass {}: removed {:?} (normalized residual {:.3})", m.pass, m.ids, m.normalized_residual);
            }
            let _ = writeln!(table, "final chi-squared {:.4} vs {:.4}: {:?}", r.final_test.statistic, r.final_test.threshold, r.verdict);
            Ok(Outcome::ok(&r, table))
        }
        Command::Qss(a) => {
            let sys = inputs.network(&a.case)?;
            let set = a.measurements.as_ref().map(|p| inputs.measurements(p)).transpose()?;
            let script = ChangeScript::from_json(&inputs.read(&a.script)?)?;
            let mut runner = QssRunner::new(sys, set, QssOptions { tolerance: a.tolerance });
            let steps = runner.run(&script)?;
            let mut table = String::new();
            for s in &steps {
                for o in &s.analyses {
                    let r = o.reuse;
                    let _ = writeln!(
                        table,
                        "step {} {:?}: iterations {}, matrix {} pattern {} factor {} warm {}",
                        s.step,
                        o.analysis,
                        o.result.iterations(),
                        r.matrix_reused,
                        r.pattern_reused,
                        r.factor_reused,
                        r.warm_start
                    );
                }
            }
            Ok(Outcome::ok(&json!({ "steps": steps }), table))
        }
        Command::Convert(a) => {
            let sys = inputs.network(&a.case)?;
            let set = a.measurements.as_ref().map(|p| inputs.measurements(p)).transpose()?;
            let text = if a.to.extension().is_some_and(|e| e == "m") {
                let name = a.to.file_stem().map_or("case".into(), |s| s.to_string_lossy().into_owned());
                CaseFile::from_network(&sys, &name)?.to_matpower_string()
            } else {
                snapshot_to_json(&sys, set.as_ref())
            };
            crate::io::write_text(&a.to, &text)?;
            let results = json!({
                "written": a.to.display().to_string(),
                "sha256": crate::report::sha256_hex(text.as_bytes()),
                "buses": sys.num_buses(),
                "branches": sys.branches().len(),
                "generators": sys.generators().len(),
                "measurements": set.as_ref().map(|s| s.len()),
            });
            Ok(Outcome::ok(&results, format!("wrote {}\n", a.to.display())))
        }
    }
}

fn command_parts(c: &Command) -> (&'static str, Value) {
    match c {
        Command::Pf(a) => ("pf", to_value(a)),
        Command::Dcpf(a) => ("dcpf", to_value(a)),
        Command::OpfDc(a) => ("opf-dc", to_value(a)),
        Command::Measure(a) => ("measure", to_value(a)),
        Command::Observe(a) => ("observe", to_value(a)),
        Command::PmuPlace(a) => ("pmu-place", to_value(a)),
        Command::Se(a) => ("se", to_value(a)),
        Command::Baddata(a) => ("baddata", to_value(a)),
        Command::Qss(a) => ("qss", to_value(a)),
        Command::Convert(a) => ("convert", to_value(a)),
    }
}

/// Runs the CLI on explicit arguments (the first is the program name),
/// writing the report to `stdout` unless `--output` is given. Returns the
/// exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(text.as_bytes()) } else { stderr.write_all(text.as_bytes()) };
            return code;
        }
    };
    let (name, options) = command_parts(&cli.command);
    let mut inputs = Inputs::default();
    let outcome = execute(&cli.command, &mut inputs);
    let report = Report::new(name, std::mem::take(&mut inputs.files), options);
    let (report, code) = match outcome {
        Ok(o) => {
            if cli.table {
                let _ = stderr.write_all(o.table.as_bytes());
            }
            (report.succeed(o.results), if o.failed { 1 } else { 0 })
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            let (kind, code) = if e.is_input_error() { (ErrorKind::Input, 2) } else { (ErrorKind::Analysis, 1) };
            (report.fail(kind, e.to_string()), code)
        }
    };
    let json = report.to_json();
    match &cli.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, json) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return 2;
            }
        }
        None => {
            let _ = stdout.write_all(json.as_bytes());
        }
    }
    code
}

/// Process entry point used by the `gridstate` binary.
pub fn main() {
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter("GRIDSTATE_LOG")).try_init();
    let code = run(std::env::args_os(), &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
