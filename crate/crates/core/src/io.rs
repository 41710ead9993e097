//! Scenario configs, command dispatch and CSV/TOML output.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which
//! round-trips every `f64` exactly.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use serde::Deserialize;

use crate::bifurcation::{self, BifurcationEvent, BifurcationKind, Branch};
use crate::equilibria::{self, Equilibrium, DEFAULT_SCAN_POINTS};
use crate::error::Error;
use crate::extinction::{self, Persistence};
use crate::geometry::{self, ManifoldOptions, PlanarCurve, ProbeOutcome, SeparatrixOptions};
use crate::integrator::{self, IntegratorOptions, Trajectory, UState, UTrajectory};
use crate::model::{self, AssumptionGrid, CheckStatus, ModelParams, Param, State};

/// Failure of a CLI command, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration. Exit code 2.
    Config(Vec<String>),
    /// The computation is undefined or failed for valid input. Exit code 1.
    Domain(String),
    /// Output could not be written. Exit code 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msgs) => write!(f, "config error: {}", msgs.join("; ")),
            CliError::Domain(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(v) => CliError::Config(v.into_iter().map(|p| p.message).collect()),
            Error::Options(m) => CliError::Config(vec![m]),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Equilibria,
    Sweep,
    Separatrix,
    Extinction,
    RefugeThreshold,
    VerifyAssumptions,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::Equilibria,
        Command::Sweep,
        Command::Separatrix,
        Command::Extinction,
        Command::RefugeThreshold,
        Command::VerifyAssumptions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Equilibria => "equilibria",
            Command::Sweep => "sweep",
            Command::Separatrix => "separatrix",
            Command::Extinction => "extinction",
            Command::RefugeThreshold => "refuge-threshold",
            Command::VerifyAssumptions => "verify-assumptions",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    a1: Option<f64>,
    a2: Option<f64>,
    b1: Option<f64>,
    w0: Option<f64>,
    w1: Option<f64>,
    d: Option<f64>,
    m1: Option<f64>,
    m2: Option<f64>,
    r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub ic: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriaSection {
    pub scan_points: usize,
}

impl Default for EquilibriaSection {
    fn default() -> Self {
        EquilibriaSection { scan_points: DEFAULT_SCAN_POINTS }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "default_sweep_n")]
    pub n: usize,
}

fn default_sweep_n() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparatrixSection {
    pub probes: usize,
    pub horizon: f64,
    pub lo_frac: f64,
    pub hi_frac: f64,
    pub cap_factor: f64,
    pub bisect_rel_tol: f64,
    pub manifold_eps: f64,
}

impl Default for SeparatrixSection {
    fn default() -> Self {
        let s = SeparatrixOptions::default();
        SeparatrixSection {
            probes: s.probes,
            horizon: s.horizon,
            lo_frac: s.lo_frac,
            hi_frac: s.hi_frac,
            cap_factor: s.cap_factor,
            bisect_rel_tol: s.bisect_rel_tol,
            manifold_eps: ManifoldOptions::default().eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionSection {
    pub ic: [f64; 2],
    /// Overrides the computed predator bound.
    pub k2: Option<f64>,
    pub eps1: Option<f64>,
    /// Defaults to `a2`.
    pub delta: Option<f64>,
    #[serde(default = "default_persistence_horizon")]
    pub horizon: f64,
}

fn default_persistence_horizon() -> f64 {
    500.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssumptionsSection {
    pub points: usize,
    pub decades: usize,
}

impl Default for AssumptionsSection {
    fn default() -> Self {
        let g = AssumptionGrid::default();
        AssumptionsSection { points: g.points, decades: g.decades }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    integrator: Option<IntegratorOptions>,
    simulate: Option<SimulateSection>,
    equilibria: Option<EquilibriaSection>,
    sweep: Option<SweepSection>,
    separatrix: Option<SeparatrixSection>,
    extinction: Option<ExtinctionSection>,
    assumptions: Option<AssumptionsSection>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub model: ModelParams,
    pub integrator: IntegratorOptions,
    pub simulate: Option<SimulateSection>,
    pub equilibria: EquilibriaSection,
    pub sweep: Option<(Param, SweepSection)>,
    pub separatrix: SeparatrixSection,
    pub extinction: Option<ExtinctionSection>,
    pub assumptions: AssumptionsSection,
}

impl ScenarioConfig {
    pub fn separatrix_options(&self) -> SeparatrixOptions {
        let s = &self.separatrix;
        SeparatrixOptions {
            probes: s.probes,
            lo_frac: s.lo_frac,
            hi_frac: s.hi_frac,
            bisect_rel_tol: s.bisect_rel_tol,
            cap_factor: s.cap_factor,
            horizon: s.horizon,
            integrator: self.integrator,
        }
    }

    pub fn manifold_options(&self) -> ManifoldOptions {
        ManifoldOptions { eps: self.separatrix.manifold_eps, integrator: self.integrator, ..ManifoldOptions::default() }
    }
}

/// Parses and validates a TOML scenario, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, CliError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string().trim_end().to_string()]))?;
    let mut errors = Vec::new();

    let model = match raw.model {
        None => {
            errors.push("missing required section [model]".to_string());
            None
        }
        Some(m) => {
            let fields = [
                ("a1", m.a1),
                ("a2", m.a2),
                ("b1", m.b1),
                ("w0", m.w0),
                ("w1", m.w1),
                ("d", m.d),
                ("m1", m.m1),
                ("m2", m.m2),
            ];
            let missing: Vec<&str> = fields.iter().filter(|(_, v)| v.is_none()).map(|(k, _)| *k).collect();
            errors.extend(missing.iter().map(|k| format!("missing required field {k}")));
            if missing.is_empty() {
                let v = |x: Option<f64>| x.expect("checked above");
                let p = ModelParams {
                    a1: v(m.a1),
                    a2: v(m.a2),
                    b1: v(m.b1),
                    w0: v(m.w0),
                    w1: v(m.w1),
                    d: v(m.d),
                    m1: v(m.m1),
                    m2: v(m.m2),
                    r: m.r.unwrap_or(1.0),
                };
                match model::validate_params(&p) {
                    Ok(p) => Some(p),
                    Err(Error::InvalidParams(v)) => {
                        errors.extend(v.into_iter().map(|e| e.message));
                        None
                    }
                    Err(e) => {
                        errors.push(e.to_string());
                        None
                    }
                }
            } else {
                None
            }
        }
    };

    let integrator = raw.integrator.unwrap_or_default();
    if let Err(Error::Options(m)) = integrator.validate() {
        errors.push(m);
    }

    let sweep = match raw.sweep {
        None => None,
        Some(s) => match s.param.parse::<Param>() {
            Ok(p) if bifurcation::SWEEP_PARAMS.contains(&p) => Some((p, s)),
            _ => {
                errors.push(format!("sweep param {:?} must be one of a1, a2, b1, w0, w1, r", s.param));
                None
            }
        },
    };

    let equilibria = raw.equilibria.unwrap_or_default();
    if equilibria.scan_points < 100 {
        errors.push(format!("scan_points = {} must be >= 100", equilibria.scan_points));
    }

    if errors.is_empty() {
        Ok(ScenarioConfig {
            model: model.expect("no errors"),
            integrator,
            simulate: raw.simulate,
            equilibria,
            sweep,
            separatrix: raw.separatrix.unwrap_or_default(),
            extinction: raw.extinction,
            assumptions: raw.assumptions.unwrap_or_default(),
        })
    } else {
        Err(CliError::Config(errors))
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
    parse_config(&text)
}

/// Float formatting shared by every output file.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str) -> Result<f64, CliError> {
    s.trim().parse::<f64>().map_err(|e| CliError::Io(format!("bad float {s:?}: {e}")))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?)
}

fn reader(path: &Path) -> Result<csv::Reader<fs::File>, CliError> {
    Ok(csv::ReaderBuilder::new().has_headers(true).from_path(path)?)
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, CliError> {
    let mut r = reader(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(CliError::Io(format!("{}: unexpected header {found:?}", path.display())));
    }
    Ok(r.records().collect::<Result<_, _>>()?)
}

pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "x1", "x2"];

pub fn write_trajectory(t: &Trajectory, path: &Path) -> Result<(), CliError> {
    write_rows(
        path,
        &TRAJECTORY_HEADER,
        t.times.iter().zip(&t.states).map(|(t, s)| vec![fmt_f64(*t), fmt_f64(s.x1), fmt_f64(s.x2)]),
    )
}

/// Rows of a trajectory file as `(t, state)`.
pub fn read_trajectory(path: &Path) -> Result<Vec<(f64, State)>, CliError> {
    read_rows(path, &TRAJECTORY_HEADER)?
        .iter()
        .map(|r| Ok((parse_f64(&r[0])?, State::new(parse_f64(&r[1])?, parse_f64(&r[2])?))))
        .collect()
}

pub const U_TRAJECTORY_HEADER: [&str; 3] = ["t", "u", "x2"];

pub fn write_u_trajectory(t: &UTrajectory, path: &Path) -> Result<(), CliError> {
    write_rows(
        path,
        &U_TRAJECTORY_HEADER,
        t.times.iter().zip(&t.states).map(|(t, s)| vec![fmt_f64(*t), fmt_f64(s.u), fmt_f64(s.x2)]),
    )
}

pub fn read_u_trajectory(path: &Path) -> Result<Vec<(f64, UState)>, CliError> {
    read_rows(path, &U_TRAJECTORY_HEADER)?
        .iter()
        .map(|r| Ok((parse_f64(&r[0])?, UState { u: parse_f64(&r[1])?, x2: parse_f64(&r[2])? })))
        .collect()
}

pub const BRANCH_HEADER: [&str; 10] = ["param", "branch_id", "x1", "x2", "tr", "det", "eig1_re", "eig1_im", "eig2_re", "eig2_im"];

/// One line of a branch file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRow {
    pub param: f64,
    pub branch_id: usize,
    pub point: State,
    pub trace: f64,
    pub det: f64,
    pub eigenvalues: [Complex64; 2],
}

pub fn branch_rows(b: &Branch) -> Vec<BranchRow> {
    b.values
        .iter()
        .zip(&b.samples)
        .flat_map(|(v, s)| {
            s.iter().map(move |bp| BranchRow {
                param: *v,
                branch_id: bp.branch_id,
                point: bp.point,
                trace: bp.spectrum.trace,
                det: bp.spectrum.det,
                eigenvalues: bp.spectrum.eigenvalues,
            })
        })
        .collect()
}

pub fn write_branch(b: &Branch, path: &Path) -> Result<(), CliError> {
    write_rows(
        path,
        &BRANCH_HEADER,
        branch_rows(b).into_iter().map(|r| {
            vec![
                fmt_f64(r.param),
                r.branch_id.to_string(),
                fmt_f64(r.point.x1),
                fmt_f64(r.point.x2),
                fmt_f64(r.trace),
                fmt_f64(r.det),
                fmt_f64(r.eigenvalues[0].re),
                fmt_f64(r.eigenvalues[0].im),
                fmt_f64(r.eigenvalues[1].re),
                fmt_f64(r.eigenvalues[1].im),
            ]
        }),
    )
}

pub fn read_branch(path: &Path) -> Result<Vec<BranchRow>, CliError> {
    read_rows(path, &BRANCH_HEADER)?
        .iter()
        .map(|r| {
            let f = |i: usize| parse_f64(&r[i]);
            Ok(BranchRow {
                param: f(0)?,
                branch_id: r[1].parse().map_err(|e| CliError::Io(format!("bad branch_id {:?}: {e}", &r[1])))?,
                point: State::new(f(2)?, f(3)?),
                trace: f(4)?,
                det: f(5)?,
                eigenvalues: [Complex64::new(f(6)?, f(7)?), Complex64::new(f(8)?, f(9)?)],
            })
        })
        .collect()
}

pub const EVENTS_HEADER: [&str; 6] = ["kind", "param_name", "critical_value", "x1", "x2", "diagnostic"];

fn fmt_diagnostics(d: &[(String, f64)]) -> String {
    d.iter().map(|(k, v)| format!("{k}={}", fmt_f64(*v))).collect::<Vec<_>>().join(";")
}

fn parse_diagnostics(s: &str) -> Result<Vec<(String, f64)>, CliError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Io(format!("bad diagnostic {kv:?}")))?;
            Ok((k.to_string(), parse_f64(v)?))
        })
        .collect()
}

pub fn write_events(events: &[BifurcationEvent], path: &Path) -> Result<(), CliError> {
    write_rows(
        path,
        &EVENTS_HEADER,
        events.iter().map(|e| {
            vec![
                e.kind.name().to_string(),
                e.param.name().to_string(),
                fmt_f64(e.critical_value),
                fmt_f64(e.point.x1),
                fmt_f64(e.point.x2),
                fmt_diagnostics(&e.diagnostics),
            ]
        }),
    )
}

pub fn read_events(path: &Path) -> Result<Vec<BifurcationEvent>, CliError> {
    read_rows(path, &EVENTS_HEADER)?
        .iter()
        .map(|r| {
            Ok(BifurcationEvent {
                kind: r[0].parse::<BifurcationKind>().map_err(|e| CliError::Io(e.to_string()))?,
                param: r[1].parse::<Param>().map_err(|e| CliError::Io(e.to_string()))?,
                critical_value: parse_f64(&r[2])?,
                point: State::new(parse_f64(&r[3])?, parse_f64(&r[4])?),
                diagnostics: parse_diagnostics(&r[5])?,
            })
        })
        .collect()
}

pub const CURVE_HEADER: [&str; 2] = ["x1", "x2"];

pub fn write_curve(c: &PlanarCurve, path: &Path) -> Result<(), CliError> {
    write_rows(path, &CURVE_HEADER, c.points.iter().map(|s| vec![fmt_f64(s.x1), fmt_f64(s.x2)]))
}

pub fn read_curve(path: &Path) -> Result<Vec<State>, CliError> {
    read_rows(path, &CURVE_HEADER)?
        .iter()
        .map(|r| Ok(State::new(parse_f64(&r[0])?, parse_f64(&r[1])?)))
        .collect()
}

pub const EQUILIBRIA_HEADER: [&str; 11] =
    ["kind", "x1", "x2", "classification", "tr", "det", "eig1_re", "eig1_im", "eig2_re", "eig2_im", "residual"];

pub fn write_equilibria(eqs: &[Equilibrium], p: &ModelParams, path: &Path) -> Result<(), CliError> {
    let nan = f64::NAN;
    write_rows(
        path,
        &EQUILIBRIA_HEADER,
        eqs.iter().map(|e| {
            let (tr, det, ev) = match e.spectrum {
                Some(s) => (s.trace, s.det, s.eigenvalues),
                None => (nan, nan, [Complex64::new(nan, nan); 2]),
            };
            let d = model::rhs(e.point, p).map(|d| d.x1.abs().max(d.x2.abs())).unwrap_or(nan);
            vec![
                format!("{:?}", e.kind),
                fmt_f64(e.point.x1),
                fmt_f64(e.point.x2),
                format!("{:?}", e.classification),
                fmt_f64(tr),
                fmt_f64(det),
                fmt_f64(ev[0].re),
                fmt_f64(ev[0].im),
                fmt_f64(ev[1].re),
                fmt_f64(ev[1].im),
                fmt_f64(d),
            ]
        }),
    )
}

/// Sidecar report, written as `report.toml`.
#[derive(Debug, Default)]
pub struct Report {
    table: toml::Table,
    flags: Vec<String>,
}

impl Report {
    pub fn new(command: Command) -> Self {
        let mut r = Report::default();
        r.set("command", command.name());
        r
    }

    pub fn set(&mut self, key: &str, v: impl Into<toml::Value>) {
        self.table.insert(key.to_string(), v.into());
    }

    pub fn set_f64(&mut self, key: &str, v: f64) {
        // TOML has nan/inf, but keep the value a parseable float either way
        self.set(key, v);
    }

    pub fn section(&mut self, key: &str, t: toml::Table) {
        self.table.insert(key.to_string(), toml::Value::Table(t));
    }

    pub fn flag(&mut self, msg: impl Into<String>) {
        self.flags.push(msg.into());
    }

    pub fn write(mut self, dir: &Path) -> Result<PathBuf, CliError> {
        let flags = std::mem::take(&mut self.flags);
        self.table.insert("flags".into(), toml::Value::Array(flags.into_iter().map(toml::Value::String).collect()));
        let path = dir.join("report.toml");
        let text = toml::to_string(&self.table).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

fn params_table(p: &ModelParams) -> toml::Table {
    let mut t = toml::Table::new();
    for param in Param::ALL {
        t.insert(param.name().into(), p.get(param).into());
    }
    t
}

fn state_value(s: State) -> toml::Value {
    toml::Value::Array(vec![s.x1.into(), s.x2.into()])
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section.as_ref().ok_or_else(|| CliError::Config(vec![format!("missing required section [{name}]")]))
}

/// What a command produced.
#[derive(Debug)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    /// One-line human summary.
    pub summary: String,
}

/// Runs `cmd` on `cfg`, writing its outputs into `out_dir`.
pub fn run_command(cmd: Command, cfg: &ScenarioConfig, out_dir: &Path) -> Result<CommandOutput, CliError> {
    fs::create_dir_all(out_dir)?;
    let p = &cfg.model;
    let mut report = Report::new(cmd);
    report.section("model", params_table(p));
    let mut files = Vec::new();
    let summary = match cmd {
        Command::Simulate => {
            let sec = require(&cfg.simulate, "simulate")?;
            let traj = integrator::integrate(p, State::new(sec.ic[0], sec.ic[1]), &cfg.integrator)?;
            let path = out_dir.join("trajectory.csv");
            write_trajectory(&traj, &path)?;
            files.push(path);
            let fin = traj.final_state();
            report.set("termination", traj.termination.name());
            if let Some(t) = traj.termination.time() {
                report.set_f64("termination_time", t);
            }
            if let integrator::Termination::StepFailure { reason, .. } = &traj.termination {
                report.flag(format!("step failure: {reason}"));
            }
            report.set("final_state", state_value(fin));
            report.set("steps", traj.len() as i64);
            format!("{} at t = {} with state ({}, {})", traj.termination.name(), traj.final_time(), fin.x1, fin.x2)
        }
        Command::Equilibria => {
            let eqs = equilibria::all_equilibria(p, cfg.equilibria.scan_points)?;
            let path = out_dir.join("equilibria.csv");
            write_equilibria(&eqs, p, &path)?;
            files.push(path);
            let interior = eqs.iter().filter(|e| e.kind == equilibria::EquilibriumKind::Interior).count();
            report.set("interior_count", interior as i64);
            if p.m2 == 1.0 {
                match equilibria::predator_nullcline_x1(p) {
                    Ok(x) => report.set_f64("predator_nullcline_x1", x),
                    Err(e) => report.flag(e.to_string()),
                }
            }
            if eqs.iter().any(|e| e.classification == equilibria::Classification::NonLinearizable) {
                report.flag("some boundary equilibria are not linearizable (m1 < 1 or m2 < 1)");
            }
            format!("{} equilibria ({interior} interior)", eqs.len())
        }
        Command::Sweep => {
            let (param, sec) = require(&cfg.sweep, "sweep")?;
            let branch = bifurcation::branch_sweep_with(p, *param, sec.lo, sec.hi, sec.n, cfg.equilibria.scan_points)?;
            let events = bifurcation::detect_all(&branch);
            let (bpath, epath) = (out_dir.join("branch.csv"), out_dir.join("events.csv"));
            write_branch(&branch, &bpath)?;
            write_events(&events, &epath)?;
            files.extend([bpath, epath]);
            report.set("param", param.name());
            report.set("event_count", events.len() as i64);
            for kind in [BifurcationKind::SaddleNode, BifurcationKind::Hopf, BifurcationKind::Transcritical] {
                let n = events.iter().filter(|e| e.kind == kind).count();
                report.set(&format!("{}_count", kind.name().to_lowercase()), n as i64);
            }
            if events.iter().any(|e| e.diagnostic("bogdanov_takens").is_some()) {
                report.flag("Hopf point with near-zero determinant: Bogdanov-Takens candidate, no normal form computed");
            }
            if *param == Param::R && p.m2 == 1.0 {
                if let Ok(t) = bifurcation::transcritical_r(p) {
                    let mut tt = toml::Table::new();
                    tt.insert("as_printed".into(), t.as_printed.into());
                    tt.insert("as_derived".into(), t.as_derived.into());
                    tt.insert("printed_matches".into(), t.printed_matches.into());
                    tt.insert("derived_matches".into(), t.derived_matches.into());
                    report.section("transcritical_r", tt);
                    if !t.printed_matches {
                        report.flag(format!(
                            "printed r1* formula ({:.6}) does not satisfy the E1 collision condition; derived value {:.6} is used",
                            t.as_printed, t.as_derived
                        ));
                    }
                }
            }
            if p.r == 1.0 && *param == Param::A1 {
                for e in events.iter().filter(|e| e.kind == BifurcationKind::Hopf) {
                    if let Ok((a1, _)) = bifurcation::hopf_critical_a1_resolved(p, e.critical_value, e.point) {
                        report.set_f64("hopf_a1_closed_form", a1);
                    }
                }
            }
            format!("{} samples, {} events", branch.values.len(), events.len())
        }
        Command::Separatrix => {
            let sep = cfg.separatrix_options();
            let (pos, ws, wu, outcomes) = geometry::separatrix_diagnostic(p, &sep, &cfg.manifold_options())?;
            let (ws_path, wu_path) = (out_dir.join("ws_e0.csv"), out_dir.join("wu_e1.csv"));
            write_curve(&ws, &ws_path)?;
            write_curve(&wu, &wu_path)?;
            files.extend([ws_path, wu_path]);
            let k = p.carrying_capacity();
            if let Ok(c) = geometry::prey_nullcline(p, (0.01 * k, k), 200) {
                let path = out_dir.join("prey_nullcline.csv");
                write_curve(&c, &path)?;
                files.push(path);
            }
            let skipped = outcomes.iter().filter(|o| matches!(o, ProbeOutcome::AllDie { .. })).count();
            report.set("verdict", format!("{:?}", pos.verdict));
            report.set_f64("margin", pos.margin);
            report.set("compared_x1", toml::Value::Array(vec![pos.x1_lo.into(), pos.x1_hi.into()]));
            report.set("probes", outcomes.len() as i64);
            report.set("probes_without_crossing", skipped as i64);
            if skipped > 0 {
                report.flag(format!("{skipped} probe line(s) have no separatrix crossing (all starts die)"));
            }
            format!("{:?} (margin {})", pos.verdict, pos.margin)
        }
        Command::Extinction => {
            let sec = require(&cfg.extinction, "extinction")?;
            let ic = State::new(sec.ic[0], sec.ic[1]);
            let verdict = extinction::simulate_extinction(p, ic, &cfg.integrator)?;
            let traj = integrator::integrate(p, ic, &cfg.integrator)?;
            let u = integrator::integrate_u_system(p, UState { u: 1.0 / ic.x1, x2: ic.x2 }, &cfg.integrator)?;
            let (tp, up) = (out_dir.join("trajectory.csv"), out_dir.join("u_trajectory.csv"));
            write_trajectory(&traj, &tp)?;
            write_u_trajectory(&u, &up)?;
            files.extend([tp, up]);
            let eps1 = sec.eps1.unwrap_or_else(|| extinction::default_eps1(p));
            let bounds = extinction::bounds_report(p, sec.delta.unwrap_or(p.a2), eps1)?;
            let mut b = toml::Table::new();
            for (k, v) in [
                ("delta", bounds.delta),
                ("w1_bound", bounds.w1_bound),
                ("q_bound", bounds.q_bound),
                ("eps1", bounds.eps1),
                ("k1", bounds.k1),
                ("k2", bounds.k2),
            ] {
                b.insert(k.into(), v.into());
            }
            b.insert("hypothesis_holds".into(), bounds.hypothesis_holds.into());
            report.section("bounds", b);
            report.set("criterion_met", verdict.criterion_met);
            report.set_f64("criterion_lhs", verdict.lhs);
            report.set_f64("criterion_rhs", verdict.threshold_rhs);
            let sim = verdict.simulated.as_ref().expect("simulated");
            report.set("termination", sim.termination.name());
            if let Some(t) = sim.termination.time() {
                report.set_f64("extinction_time", t);
            }
            if let Some(t) = sim.blowup_time {
                report.set_f64("blowup_time", t);
            }
            if let Some(g) = sim.relative_gap {
                report.set_f64("relative_gap", g);
            }
            report.flag("extinction criterion uses w0/a1 (the u-equation derivation forces a1)");
            for n in bounds.notes.iter().chain(verdict.notes.iter().filter(|n| !n.contains("w0/a1"))) {
                report.flag(n.clone());
            }
            format!("{}; criterion met: {}", sim.termination, verdict.criterion_met)
        }
        Command::RefugeThreshold => {
            let sec = require(&cfg.extinction, "extinction")?;
            let k2 = match sec.k2 {
                Some(k2) => k2,
                None => extinction::dissipative_bound_k2(p, sec.eps1.unwrap_or_else(|| extinction::default_eps1(p)))?.1,
            };
            let t = extinction::refuge_threshold(sec.ic[0], p, k2)?;
            report.set_f64("r_star", t.r_star);
            report.set_f64("raw", t.raw);
            report.set_f64("v0", t.v0);
            report.set_f64("k2", t.k2);
            for n in &t.notes {
                report.flag(n.clone());
            }
            let r_test = 0.9 * t.r_star;
            let check = extinction::verify_persistence(
                &p.with_refuge(r_test)?,
                State::new(sec.ic[0], sec.ic[1]),
                sec.horizon,
                &cfg.integrator,
            )?;
            let mut c = toml::Table::new();
            c.insert("r".into(), r_test.into());
            match check {
                Persistence::Persistent { horizon, min_x1 } => {
                    c.insert("verdict".into(), "Persistent".into());
                    c.insert("horizon".into(), horizon.into());
                    c.insert("min_x1".into(), min_x1.into());
                }
                Persistence::ExtinctAt { time } => {
                    c.insert("verdict".into(), "ExtinctAt".into());
                    c.insert("time".into(), time.into());
                }
            }
            report.section("persistence_check", c);
            if sec.ic[1] > k2 {
                report.flag(format!("x2(0) = {} exceeds K2 = {k2}; the threshold assumes x2 <= K2", sec.ic[1]));
            }
            format!("r* = {}", t.r_star)
        }
        Command::VerifyAssumptions => {
            let grid = AssumptionGrid { points: cfg.assumptions.points, decades: cfg.assumptions.decades };
            let rep = model::verify_assumptions(p, grid)?;
            let mut checks = toml::Table::new();
            for c in &rep.checks {
                let mut t = toml::Table::new();
                let status = match c.status {
                    CheckStatus::Pass => "pass",
                    CheckStatus::Fail => "fail",
                    CheckStatus::NotApplicable => "not_applicable",
                };
                t.insert("status".into(), status.into());
                t.insert("detail".into(), c.detail.clone().into());
                checks.insert(c.id.clone(), toml::Value::Table(t));
            }
            report.section("checks", checks);
            report.set("all_pass", rep.all_pass());
            let passed = rep.checks.iter().filter(|c| c.status == CheckStatus::Pass).count();
            format!("{passed}/{} assumption checks pass", rep.checks.len())
        }
    };
    files.push(report.write(out_dir)?);
    Ok(CommandOutput { files, summary })
}
