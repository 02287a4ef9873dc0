//! Python bindings: group law, convex bodies, the closed-form solver, the
//! direct Hamiltonian integrator and configuration runs.

use std::fmt::Display;

use cartan_core::algebra::{self, AlgebraVector, GroupElement as CoreElement};
use cartan_core::cli::{self, CliError, RunConfig, EXIT_CONFIG, EXIT_IO};
use cartan_core::convex::{BodySpec, ConvexBody as CoreBody};
use cartan_core::hamiltonian::{self, CovectorInit};
use cartan_core::oracle::{self, OracleError, OracleRun};
use cartan_core::solver::{self, DwellEntry, NormalCovector, SolverError, ThetaSolution, Trajectory};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::Serialize;

create_exception!(cartan, CartanError, PyException, "Numerical failure in the solver or the integrator.");

fn value_err(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e.exit_code() {
        EXIT_CONFIG => PyValueError::new_err(e.to_string()),
        EXIT_IO => PyOSError::new_err(e.to_string()),
        _ => CartanError::new_err(e.to_string()),
    }
}

fn solver_err(e: SolverError) -> PyErr {
    cli_err(cli::classify_solver(e))
}

fn oracle_err(e: OracleError) -> PyErr {
    cli_err(CliError::Oracle(e))
}

/// Plain Python data (dicts, lists, floats) from anything serializable.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn covector(phi: [f64; 5]) -> PyResult<CovectorInit> {
    CovectorInit::new(phi).map_err(value_err)
}

/// Point of the Cartan group in exponential coordinates `(x, y, z, v, w)`.
#[pyclass(module = "cartan", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct GroupElement(CoreElement);

#[pymethods]
impl GroupElement {
    #[new]
    #[pyo3(signature = (x=0.0, y=0.0, z=0.0, v=0.0, w=0.0))]
    fn new(x: f64, y: f64, z: f64, v: f64, w: f64) -> Self {
        Self(CoreElement::new(x, y, z, v, w))
    }

    /// `exp` of the algebra element with coordinates `a` in the basis `X, Y, Z, V, W`.
    #[staticmethod]
    fn exp(a: [f64; 5]) -> Self {
        Self(CoreElement::exp(AlgebraVector::from_array(a)))
    }

    fn log(&self) -> [f64; 5] {
        self.0.log().to_array()
    }

    fn inverse(&self) -> Self {
        Self(algebra::group_inv(self.0))
    }

    fn to_list(&self) -> [f64; 5] {
        self.0.to_array()
    }

    fn __mul__(&self, other: &Self) -> Self {
        Self(algebra::group_mul(self.0, other.0))
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn __repr__(&self) -> String {
        let CoreElement { x, y, z, v, w } = self.0;
        format!("GroupElement(x={x:?}, y={y:?}, z={z:?}, v={v:?}, w={w:?})")
    }

    #[getter]
    fn x(&self) -> f64 {
        self.0.x
    }
    #[getter]
    fn y(&self) -> f64 {
        self.0.y
    }
    #[getter]
    fn z(&self) -> f64 {
        self.0.z
    }
    #[getter]
    fn v(&self) -> f64 {
        self.0.v
    }
    #[getter]
    fn w(&self) -> f64 {
        self.0.w
    }
}

/// Lie bracket of two algebra elements given by coordinates.
#[pyfunction]
fn bracket(a: [f64; 5], b: [f64; 5]) -> [f64; 5] {
    algebra::bracket(AlgebraVector::from_array(a), AlgebraVector::from_array(b)).to_array()
}

/// `g0 · exp(t a)` by integrating the left-invariant field of `a`.
#[pyfunction]
#[pyo3(signature = (g0, a, t, tol=1e-12))]
fn exp_flow(g0: &GroupElement, a: [f64; 5], t: f64, tol: f64) -> PyResult<GroupElement> {
    algebra::exp_flow(g0.0, AlgebraVector::from_array(a), t, tol).map(GroupElement).map_err(value_err)
}

/// Rows `X, Y, Z, V, W` of the left-invariant frame at `g`.
#[pyfunction]
fn left_invariant_frame(g: &GroupElement) -> [[f64; 5]; 5] {
    algebra::left_invariant_frame(g.0)
}

/// Convex compact set `U` of admissible controls, with `0` in its interior.
#[pyclass(module = "cartan", frozen, from_py_object)]
#[derive(Clone)]
struct ConvexBody(CoreBody);

#[pymethods]
impl ConvexBody {
    #[staticmethod]
    fn disc(radius: f64) -> PyResult<Self> {
        CoreBody::disc(radius).map(Self).map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (a, b, center=[0.0, 0.0], angle=0.0))]
    fn ellipse(a: f64, b: f64, center: [f64; 2], angle: f64) -> PyResult<Self> {
        CoreBody::from_spec(&BodySpec::Ellipse { a, b, center, angle }).map(Self).map_err(value_err)
    }

    /// Vertices in counterclockwise order.
    #[staticmethod]
    fn polygon(vertices: Vec<[f64; 2]>) -> PyResult<Self> {
        CoreBody::polygon(vertices).map(Self).map_err(value_err)
    }

    #[staticmethod]
    fn unit_square() -> Self {
        Self(CoreBody::unit_square())
    }

    /// Body from its JSON form, e.g. `{"type": "disc", "radius": 1}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let spec: BodySpec = serde_json::from_str(text).map_err(value_err)?;
        CoreBody::from_spec(&spec).map(Self).map_err(value_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0.to_spec()).map_err(value_err)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind()
    }

    fn vertices(&self) -> Option<Vec<[f64; 2]>> {
        self.0.vertices().map(<[_]>::to_vec)
    }

    /// `F_U(u)`, the gauge (Minkowski functional) of `U`.
    fn gauge(&self, u: [f64; 2]) -> f64 {
        self.0.gauge(u)
    }

    /// `H_U(h) = max_{u ∈ U} ⟨h, u⟩`, equal to the gauge of the polar `U*`.
    fn support(&self, h: [f64; 2]) -> f64 {
        self.0.support(h)
    }

    /// Radius of `∂U*` in direction `theta`.
    fn polar_radius(&self, theta: f64) -> f64 {
        self.0.polar_radius(theta)
    }

    fn polar_point(&self, theta: f64) -> [f64; 2] {
        self.0.polar_point(theta)
    }

    fn polar_area(&self) -> f64 {
        self.0.polar_area()
    }

    /// Angles in `[0, 2π)` where `∂U*` has a corner.
    fn corner_angles(&self) -> Vec<f64> {
        self.0.corner_angles()
    }

    /// Endpoints of the face of `U` maximizing `⟨h, u⟩`; both equal when the
    /// maximizer is unique.
    fn argmax_control(&self, h: [f64; 2]) -> PyResult<([f64; 2], [f64; 2])> {
        self.0.argmax_control(h).map(|f| f.endpoints()).map_err(value_err)
    }

    #[pyo3(signature = (n=256))]
    fn boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        self.0.boundary_points(n)
    }

    #[pyo3(signature = (n=256))]
    fn polar_boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        self.0.polar_boundary_points(n)
    }

    fn __repr__(&self) -> String {
        format!("ConvexBody({})", self.to_json().unwrap_or_default())
    }
}

/// Closed-form normal extremal for `ψ(0) = phi`, with an optional schedule of
/// dwells at separatrix zeros given as `(arrival, duration, reverse)` tuples.
#[pyclass(module = "cartan", frozen)]
struct Solution {
    inner: ThetaSolution,
}

#[pymethods]
impl Solution {
    #[new]
    #[pyo3(signature = (phi, body, dwell=Vec::new()))]
    fn new(phi: [f64; 5], body: &ConvexBody, dwell: Vec<(usize, f64, bool)>) -> PyResult<Self> {
        let schedule: Vec<DwellEntry> =
            dwell.into_iter().map(|(arrival, duration, reverse)| DwellEntry { arrival, duration, reverse }).collect();
        let inner = ThetaSolution::new(&covector(phi)?, &body.0, &schedule).map_err(solver_err)?;
        Ok(Self { inner })
    }

    /// Case label as a dict with key `case` and the case parameters.
    fn label<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.label())
    }

    #[getter]
    fn case(&self) -> &'static str {
        self.inner.label().name()
    }

    #[getter]
    fn theta0(&self) -> f64 {
        self.inner.theta0()
    }

    /// `(E₋₁, E₀)` when `(φ4, φ5) ≠ 0`.
    fn energy_bounds(&self) -> Option<(f64, f64)> {
        self.inner.energy_bounds().map(|b| (b.e_min, b.e_max))
    }

    /// `(start, period)` of the repeating part of `θ(t)`, if any.
    fn periodicity(&self) -> Option<(f64, f64)> {
        self.inner.periodicity()
    }

    fn theta(&self, t: f64) -> PyResult<f64> {
        self.inner.theta(t).map_err(solver_err)
    }

    /// Samples the extremal on `grid` (starting at 0, non-decreasing).
    fn reconstruct<'py>(&self, py: Python<'py>, grid: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let tr = solver::reconstruct(&self.inner, &grid).map_err(solver_err)?;
        trajectory_dict(py, &tr)
    }
}

fn columns<'py>(
    py: Python<'py>,
    t: &[f64],
    g: &[CoreElement],
    u: &[[f64; 2]],
    h: &[hamiltonian::VerticalCoords],
    m: &[f64],
) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("t", t)?;
    let gs: Vec<[f64; 5]> = g.iter().map(|g| g.to_array()).collect();
    for (k, name) in ["x", "y", "z", "v", "w"].into_iter().enumerate() {
        d.set_item(name, gs.iter().map(|a| a[k]).collect::<Vec<_>>())?;
    }
    d.set_item("u1", u.iter().map(|u| u[0]).collect::<Vec<_>>())?;
    d.set_item("u2", u.iter().map(|u| u[1]).collect::<Vec<_>>())?;
    let hs: Vec<[f64; 5]> = h.iter().map(|h| h.to_array()).collect();
    for (k, name) in ["h1", "h2", "h3", "h4", "h5"].into_iter().enumerate() {
        d.set_item(name, hs.iter().map(|a| a[k]).collect::<Vec<_>>())?;
    }
    d.set_item("M", m)?;
    Ok(d)
}

fn trajectory_dict<'py>(py: Python<'py>, tr: &Trajectory) -> PyResult<Bound<'py, PyDict>> {
    let d = columns(py, &tr.t, &tr.g, &tr.u, &tr.h, &tr.m)?;
    d.set_item("theta", &tr.theta)?;
    d.set_item("sigma", &tr.sigma)?;
    d.set_item("case", to_py(py, &tr.case)?)?;
    d.set_item("casimirs", tr.casimirs)?;
    Ok(d)
}

fn oracle_dict<'py>(py: Python<'py>, run: &OracleRun) -> PyResult<Bound<'py, PyDict>> {
    let d = columns(py, &run.t, &run.g, &run.u, &run.h, &run.m)?;
    d.set_item("psi", PyList::new(py, &run.psi)?)?;
    d.set_item("switches", &run.switches)?;
    Ok(d)
}

/// Integrates the state and adjoint equations directly on `grid`.
#[pyfunction]
#[pyo3(signature = (phi, body, grid, tol=1e-10))]
fn integrate_hamiltonian<'py>(
    py: Python<'py>,
    phi: [f64; 5],
    body: &ConvexBody,
    grid: Vec<f64>,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let phi = covector(phi)?;
    let run = oracle::integrate_hamiltonian(&phi, &body.0, &grid, tol).map_err(oracle_err)?;
    let d = oracle_dict(py, &run)?;
    d.set_item("audit", to_py(py, &oracle::verify_invariants(&run, &phi, &body.0))?)?;
    Ok(d)
}

/// Abnormal extremal for `(φ4, φ5)` and sign `s`; `covector` is `"dual"` or
/// `"explicit"`.
#[pyfunction]
#[pyo3(signature = (phi4, phi5, s, body, grid, covector="dual"))]
fn abnormal_trajectory<'py>(
    py: Python<'py>,
    phi4: f64,
    phi5: f64,
    s: f64,
    body: &ConvexBody,
    grid: Vec<f64>,
    covector: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let covector = match covector {
        "dual" => NormalCovector::Dual,
        "explicit" => NormalCovector::Explicit,
        other => return Err(PyValueError::new_err(format!("unknown covector {other:?}"))),
    };
    let tr = solver::abnormal_trajectory(phi4, phi5, s, &body.0, &grid, covector).map_err(solver_err)?;
    trajectory_dict(py, &tr)
}

/// Period of the planar projection when `φ4 = φ5 = 0 ≠ φ3`.
#[pyfunction]
fn period(phi: [f64; 5], body: &ConvexBody) -> PyResult<f64> {
    solver::period(&covector(phi)?, &body.0).map_err(solver_err)
}

/// Runs a JSON configuration in memory; returns `(csv, metadata_json)` exactly
/// as the command line tool would write them.
#[pyfunction]
#[pyo3(signature = (config, oracle=false))]
fn run_config(config: &str, oracle: bool) -> PyResult<(String, String)> {
    let cfg = RunConfig::from_json(config).map_err(cli_err)?;
    let out = cli::execute(&cfg, oracle).map_err(cli_err)?;
    Ok((cli::trajectory_csv(&out.trajectory), cli::to_json(&out.metadata)))
}

#[pymodule]
pub fn cartan(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CartanError", m.py().get_type::<CartanError>())?;
    m.add("CSV_HEADER", cli::CSV_HEADER)?;
    m.add_class::<GroupElement>()?;
    m.add_class::<ConvexBody>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(bracket, m)?)?;
    m.add_function(wrap_pyfunction!(exp_flow, m)?)?;
    m.add_function(wrap_pyfunction!(left_invariant_frame, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(abnormal_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(period, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
