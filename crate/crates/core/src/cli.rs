//! Command-line front end: run configurations, batch runs and artifact export.
//!
//! A run reads a [`RunConfig`] JSON file, computes the extremal with the
//! closed-form solver (optionally cross-checked by the Hamiltonian oracle) and
//! writes a trajectory CSV, a metadata JSON and optionally an SVG figure.
//! Floats are written as `{:.16e}` (17 significant digits) so identical inputs
//! give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::convex::{BodySpec, ConvexBody};
use crate::hamiltonian::{CovectorInit, POLAR_TOL};
use crate::oracle::{self, AuditReport, OracleError};
use crate::solver::{
    self, AbnormalPattern, CaseLabel, DwellEntry, NormalCovector, SolverError, ThetaSolution, Trajectory,
};

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping batch parallelism.
pub const THREADS_ENV: &str = "CARTAN_NUM_THREADS";

pub const CSV_HEADER: &str = "t,x,y,z,v,w,u1,u2,h1,h2,h3,h4,h5,theta,M";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn io(path: &Path, source: io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Solver(_) | Self::Oracle(_) => EXIT_NUMERIC,
            Self::Io { .. } => EXIT_IO,
        }
    }

    /// Machine-readable form written to stderr on failure.
    pub fn payload(&self) -> serde_json::Value {
        let (module, debug) = match self {
            Self::Config(_) => ("config", String::from("Config")),
            Self::Solver(e) => ("solver", format!("{e:?}")),
            Self::Oracle(e) => ("oracle", format!("{e:?}")),
            Self::Io { .. } => ("io", String::from("Io")),
        };
        let kind = debug.split(|c: char| !c.is_alphanumeric()).next().unwrap_or_default().to_string();
        serde_json::json!({
            "module": module,
            "kind": kind,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
    }
}

/// Errors in the user's problem statement are configuration errors, not
/// numerical failures.
pub fn classify_solver(e: SolverError) -> CliError {
    match e {
        SolverError::NotOnPolar { .. }
        | SolverError::InvalidAbnormal
        | SolverError::InvalidSign(_)
        | SolverError::InvalidSchedule(_)
        | SolverError::InvalidGrid(_) => CliError::Config(e.to_string()),
        e => CliError::Solver(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    Normal,
    Abnormal {
        s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pattern: Option<AbnormalPattern>,
        #[serde(default = "default_covector")]
        covector: NormalCovector,
    },
}

fn default_covector() -> NormalCovector {
    NormalCovector::Dual
}

impl Default for Mode {
    fn default() -> Self {
        Self::Normal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { enabled: false, tol: default_tol() }
    }
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub body: BodySpec,
    pub phi: [f64; 5],
    #[serde(default)]
    pub mode: Mode,
    /// Horizon `T`; the grid is uniform on `[0, T]`.
    #[serde(rename = "T")]
    pub horizon: f64,
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dwell: Vec<DwellEntry>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Validated problem.
struct Problem {
    body: ConvexBody,
    phi: CovectorInit,
    grid: Vec<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    fn validate(&self) -> Result<Problem, CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let body = ConvexBody::from_spec(&self.body).map_err(|e| CliError::Config(e.to_string()))?;
        let phi = CovectorInit::new(self.phi).map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("T must be positive and finite, got {}", self.horizon));
        }
        if self.nodes < 2 {
            return bad(format!("nodes must be at least 2, got {}", self.nodes));
        }
        if !(self.oracle.tol.is_finite() && self.oracle.tol > 0.0) {
            return bad(format!("oracle tol must be positive, got {}", self.oracle.tol));
        }
        match &self.mode {
            Mode::Normal => {
                let defect = phi.polar_defect(&body);
                if !(defect <= POLAR_TOL) {
                    return bad(format!("F_U(phi1, phi2) = 1 violated by {defect:e}"));
                }
            }
            Mode::Abnormal { s, pattern, .. } => {
                if self.phi[..3].iter().any(|&p| p != 0.0) {
                    return bad("abnormal mode needs phi1 = phi2 = phi3 = 0".into());
                }
                if *s != 1.0 && *s != -1.0 {
                    return bad(format!("abnormal sign must be +1 or -1, got {s}"));
                }
                let actual = solver::abnormal_pattern(self.phi[3], self.phi[4]).map_err(classify_solver)?;
                if let Some(p) = pattern {
                    if *p != actual {
                        return bad(format!("pattern {p:?} does not match (phi4, phi5), which give {actual:?}"));
                    }
                }
                if !self.dwell.is_empty() {
                    return bad("dwell schedules apply to normal mode only".into());
                }
            }
        }
        Ok(Problem { body, phi, grid: solver::uniform_grid(self.horizon, self.nodes) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Casimirs {
    pub h4: f64,
    pub h5: f64,
    #[serde(rename = "E")]
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    #[serde(rename = "E0")]
    pub e_max: f64,
    #[serde(rename = "E_minus1")]
    pub e_min: f64,
}

/// Eventual periodicity of `θ(t)` for `t ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaCycle {
    pub start: f64,
    pub period: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverAudit {
    /// `|L(g) − t|/(1 + |t|)`; normal mode only.
    pub linear_integral: Option<f64>,
    /// `|F(u) − 1|`.
    pub control: f64,
    /// `|M − 1|`.
    pub hamiltonian: f64,
    /// `|F_U(h1, h2) − 1|`.
    pub polar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Audits {
    pub solver: SolverAudit,
    pub oracle: Option<AuditReport>,
    /// Sup-norm distance between solver and oracle trajectories.
    pub solver_vs_oracle: Option<f64>,
    pub switches: Option<usize>,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub version: &'static str,
    pub config: RunConfig,
    pub case: CaseLabel,
    pub casimirs: Casimirs,
    pub energy_bounds: Option<Bounds>,
    pub theta0: f64,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub period: Option<f64>,
    pub theta_cycle: Option<ThetaCycle>,
    pub audits: Audits,
}

/// Result of [`execute`]: everything a run writes.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub metadata: Metadata,
    pub isoperimetrix: Option<Vec<[f64; 2]>>,
}

/// Computes a run without touching the filesystem.
pub fn execute(cfg: &RunConfig, with_oracle: bool) -> Result<RunOutcome, CliError> {
    let pb = cfg.validate()?;
    let with_oracle = with_oracle || cfg.oracle.enabled;
    let (trajectory, normal_phi, sol) = match &cfg.mode {
        Mode::Normal => {
            let sol = ThetaSolution::new(&pb.phi, &pb.body, &cfg.dwell).map_err(classify_solver)?;
            let tr = solver::reconstruct(&sol, &pb.grid).map_err(classify_solver)?;
            (tr, pb.phi, Some(sol))
        }
        Mode::Abnormal { s, covector, .. } => {
            let (p4, p5) = (cfg.phi[3], cfg.phi[4]);
            let tr = solver::abnormal_trajectory(p4, p5, *s, &pb.body, &pb.grid, *covector).map_err(classify_solver)?;
            let psi = solver::abnormal_normal_covector(p4, p5, *s, &pb.body, *covector).map_err(classify_solver)?;
            let normal = CovectorInit::new(psi).map_err(|e| CliError::Solver(e.into()))?;
            (tr, normal, None)
        }
    };

    let solver_audit = SolverAudit {
        linear_integral: sol.as_ref().map(|_| trajectory.linear_integral_defect(&pb.phi)),
        control: trajectory.control_defect(&pb.body),
        hamiltonian: trajectory.m.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max),
        polar: trajectory.h.iter().map(|h| (pb.body.support([h.h1, h.h2]) - 1.0).abs()).fold(0.0, f64::max),
    };
    let mut audits = Audits {
        solver: solver_audit,
        oracle: None,
        solver_vs_oracle: None,
        switches: None,
        max: [solver_audit.linear_integral.unwrap_or(0.0), solver_audit.control, solver_audit.hamiltonian, solver_audit.polar]
            .into_iter()
            .fold(0.0, f64::max),
    };
    if with_oracle {
        let run = oracle::integrate_hamiltonian(&normal_phi, &pb.body, &pb.grid, cfg.oracle.tol)?;
        let report = oracle::verify_invariants(&run, &normal_phi, &pb.body);
        let dev = trajectory.g.iter().zip(&run.g).map(|(a, b)| a.max_abs_diff(b)).fold(0.0, f64::max);
        audits.max = audits.max.max(report.max()).max(dev);
        audits.oracle = Some(report);
        audits.solver_vs_oracle = Some(dev);
        audits.switches = Some(run.switches.len());
    }

    let case = trajectory.case.clone();
    let (theta1, theta2, t1, t2) = match case {
        CaseLabel::Oscillating { theta1, theta2, t1, t2 } => (Some(theta1), Some(theta2), Some(t1), Some(t2)),
        CaseLabel::Separatrix { theta1, theta2, t1, t2, .. } => (Some(theta1), Some(theta2), t1, t2),
        CaseLabel::SeparatrixAtRest { theta1, theta2, .. } => (Some(theta1), Some(theta2), None, None),
        _ => (None, None, None, None),
    };
    let period = match case {
        CaseLabel::Periodic { period } => Some(period),
        _ => None,
    };
    let (h4, h5, energy) = trajectory.casimirs;
    let isoperimetrix = match case {
        CaseLabel::Periodic { .. } => pb
            .body
            .isoperimetrix(pb.phi.phi1(), pb.phi.phi2(), pb.phi.phi3())
            .ok()
            .map(|c| c.sample(720)),
        _ => None,
    };
    let metadata = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg.clone(),
        case,
        casimirs: Casimirs { h4, h5, energy },
        energy_bounds: sol
            .as_ref()
            .and_then(|s| s.energy_bounds())
            .map(|b| Bounds { e_max: b.e_max, e_min: b.e_min }),
        theta0: trajectory.theta.first().copied().unwrap_or(normal_phi.theta0()),
        theta1,
        theta2,
        t1,
        t2,
        period,
        theta_cycle: sol.as_ref().and_then(|s| s.periodicity()).map(|(start, period)| ThetaCycle { start, period }),
        audits,
    };
    Ok(RunOutcome { trajectory, metadata, isoperimetrix })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trajectory table with header [`CSV_HEADER`].
pub fn trajectory_csv(tr: &Trajectory) -> String {
    let mut out = String::with_capacity(tr.len() * 15 * 24);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..tr.len() {
        let g = tr.g[i].to_array();
        let h = tr.h[i].to_array();
        let row = std::iter::once(tr.t[i])
            .chain(g)
            .chain(tr.u[i])
            .chain(h)
            .chain([tr.theta[i], tr.m[i]])
            .map(num)
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Pretty JSON with every float printed as `{:.16e}`.
struct FixedFloats(PrettyFormatter<'static>);

impl Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(num(value).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("metadata serializes");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

struct Series<'a> {
    points: &'a [[f64; 2]],
    color: &'static str,
    dashed: bool,
}

const PANEL: f64 = 360.0;
const MARGIN: f64 = 30.0;

/// One panel of the figure: axis box, title and polylines, autoscaled to the
/// data (with equal axes when `equal` is set).
fn panel(out: &mut String, x0: f64, title: &str, series: &[Series], equal: bool) {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p[0].is_finite() && p[1].is_finite());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let mut span = [hi[0] - lo[0], hi[1] - lo[1]];
    for k in 0..2 {
        if span[k] <= 1e-12 * (1.0 + lo[k].abs()) {
            lo[k] -= 0.5;
            span[k] = 1.0;
        }
    }
    if equal {
        let s = span[0].max(span[1]);
        for k in 0..2 {
            lo[k] -= 0.5 * (s - span[k]);
            span[k] = s;
        }
    }
    let inner = PANEL - 2.0 * MARGIN;
    let map = |p: [f64; 2]| {
        [x0 + MARGIN + inner * (p[0] - lo[0]) / span[0], 2.0 * MARGIN + inner * (1.0 - (p[1] - lo[1]) / span[1])]
    };
    let _ = writeln!(
        out,
        r##"<rect x="{:.2}" y="{:.2}" width="{inner:.2}" height="{inner:.2}" fill="none" stroke="#888"/>"##,
        x0 + MARGIN,
        2.0 * MARGIN
    );
    let _ = writeln!(out, r##"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{title}</text>"##, x0 + 0.5 * PANEL, 1.4 * MARGIN);
    for s in series {
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|p| p[0].is_finite() && p[1].is_finite())
            .map(|&p| {
                let q = map(p);
                format!("{:.3},{:.3}", q[0], q[1])
            })
            .collect();
        let dash = if s.dashed { r##" stroke-dasharray="4 3""## } else { "" };
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="{}" stroke-width="1.2"{dash} points="{}"/>"##,
            s.color,
            coords.join(" ")
        );
    }
}

/// Three panels: planar projection `(x, y)` (with the isoperimetrix in the
/// periodic case), `θ(t)`, and the curves `∂U`, `∂U*`.
pub fn trajectory_svg(out: &RunOutcome, body: &ConvexBody) -> String {
    let tr = &out.trajectory;
    let xy: Vec<[f64; 2]> = tr.g.iter().map(|g| [g.x, g.y]).collect();
    let th: Vec<[f64; 2]> = tr.t.iter().zip(&tr.theta).map(|(&t, &a)| [t, a]).collect();
    let bu = body.boundary_points(360);
    let bp = body.polar_boundary_points(360);
    let mut s = String::new();
    let width = 3.0 * PANEL;
    let height = PANEL + MARGIN;
    let _ = writeln!(s, r##"<?xml version="1.0" encoding="UTF-8"?>"##);
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"##
    );
    let mut planar = vec![Series { points: &xy, color: "#1f4e9c", dashed: false }];
    if let Some(iso) = &out.isoperimetrix {
        planar.push(Series { points: iso, color: "#c0392b", dashed: true });
    }
    panel(&mut s, 0.0, "(x, y)", &planar, true);
    panel(&mut s, PANEL, "theta(t)", &[Series { points: &th, color: "#1f4e9c", dashed: false }], false);
    panel(
        &mut s,
        2.0 * PANEL,
        "U and U*",
        &[Series { points: &bu, color: "#1f4e9c", dashed: false }, Series { points: &bp, color: "#c0392b", dashed: false }],
        true,
    );
    s.push_str("</svg>\n");
    s
}

/// Flags of the `run` subcommand.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub oracle: bool,
    pub svg: bool,
    /// Defaults to the directory of the config file.
    pub out_dir: Option<PathBuf>,
}

/// Paths written by a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub svg: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Suffix of metadata files; batch skips inputs carrying it.
pub const META_SUFFIX: &str = ".meta.json";

/// Writes the artifacts of a finished run.
fn emit(
    cfg: &RunConfig,
    out: &RunOutcome,
    config: &Path,
    dir: &Path,
    svg: bool,
) -> Result<Artifacts, CliError> {
    let stem = stem(config);
    let name = |given: &Option<String>, ext: &str| dir.join(given.clone().unwrap_or_else(|| format!("{stem}{ext}")));
    let arts = Artifacts {
        csv: name(&cfg.outputs.csv, ".csv"),
        json: name(&cfg.outputs.json, META_SUFFIX),
        svg: (svg || cfg.outputs.svg.is_some()).then(|| name(&cfg.outputs.svg, ".svg")),
    };
    let same = |p: &Path| match (fs::canonicalize(config), fs::canonicalize(p)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    };
    if let Some(p) = [Some(&arts.csv), Some(&arts.json), arts.svg.as_ref()].into_iter().flatten().find(|p| same(p)) {
        return Err(CliError::Config(format!("output {} would overwrite the config", p.display())));
    }
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write(&arts.csv, &trajectory_csv(&out.trajectory))?;
    write(&arts.json, &to_json(&out.metadata))?;
    if let Some(p) = &arts.svg {
        let body = ConvexBody::from_spec(&cfg.body).map_err(|e| CliError::Config(e.to_string()))?;
        write(p, &trajectory_svg(out, &body))?;
    }
    Ok(arts)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

/// The `run` subcommand. Nothing is written unless the whole computation
/// succeeds.
pub fn run(config: &Path, opts: &RunOptions) -> Result<(RunOutcome, Artifacts), CliError> {
    let cfg = RunConfig::load(config)?;
    let out = execute(&cfg, opts.oracle)?;
    let dir = match &opts.out_dir {
        Some(d) => d.clone(),
        None => config.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let arts = emit(&cfg, &out, config, &dir, opts.svg)?;
    Ok((out, arts))
}

/// One line of the batch summary.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRow {
    pub config: String,
    pub result: Result<(String, f64), (i32, String)>,
    pub wall_time: f64,
}

impl BatchRow {
    fn csv(&self) -> String {
        let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
        match &self.result {
            Ok((case, audit)) => {
                format!("{},ok,{case},{},{},0,\n", quote(&self.config), num(*audit), num(self.wall_time))
            }
            Err((code, msg)) => {
                format!("{},failed,,,{},{code},{}\n", quote(&self.config), num(self.wall_time), quote(msg))
            }
        }
    }
}

pub const BATCH_HEADER: &str = "config,status,case,max_audit,wall_time_s,exit_code,error";

fn batch_threads() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0)
}

/// The `batch` subcommand: runs every `*.json` config in `dir` except
/// metadata files (in parallel, at most [`THREADS_ENV`] at a time), writing
/// artifacts next to `summary`.
/// Failed runs are recorded and do not stop the batch.
pub fn batch(dir: &Path, summary: &Path) -> Result<Vec<BatchRow>, CliError> {
    let mut configs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            p.is_file() && name.ends_with(".json") && !name.ends_with(META_SUFFIX)
        })
        .collect();
    configs.sort();
    let out_dir = summary.parent().map(Path::to_path_buf).unwrap_or_default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(batch_threads())
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let rows: Vec<BatchRow> = pool.install(|| {
        configs
            .par_iter()
            .map(|path| {
                let start = Instant::now();
                let result = RunConfig::load(path).and_then(|cfg| {
                    let out = execute(&cfg, false)?;
                    let mut cfg = cfg;
                    cfg.outputs = Outputs::default();
                    emit(&cfg, &out, path, &out_dir, false)?;
                    Ok((out.metadata.case.name().to_string(), out.metadata.audits.max))
                });
                BatchRow {
                    config: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                    result: result.map_err(|e| (e.exit_code(), e.to_string())),
                    wall_time: start.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });
    let mut text = String::from(BATCH_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.csv());
    }
    write(summary, &text)?;
    Ok(rows)
}
