//! Direct integration of the Hamiltonian system in `(g, ψ)`.
//!
//! The control is the maximizer of `h1 u1 + h2 u2` over `U`, recomputed from
//! the current state. For polygons it is piecewise constant (a vertex) and
//! switches when `(h1, h2)` crosses an edge normal; switches are located by
//! bisection on the step length. Nothing here uses the closed forms of
//! [`crate::solver`], so runs serve as an independent reference.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{left_invariant_frame, GroupElement, HALF, TWELFTH};
use crate::convex::{ConvexBody, ControlFace, ConvexError};
use crate::hamiltonian::{pair_with_frame, psi_closed_form, CovectorInit, VerticalCoords, POLAR_TOL};
use crate::numeric::ode::{self, step_factor, try_step, OdeError, OdeOptions};
use crate::solver::linear_integral;

/// Below this `|h3|` at a switch the direction is considered to stay on the
/// edge normal.
const STALL_H3: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("(phi1, phi2) is off the polar curve: |F_U(phi1, phi2) - 1| = {defect:e}")]
    NotOnPolar { defect: f64 },
    #[error("control is undetermined: (h1, h2) = 0")]
    ZeroHorizontal,
    #[error("direction stays on an edge normal from t = {t} (h3 = {h3:e}); the control is singular there")]
    NonUniqueControlStall { t: f64, h3: f64 },
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

/// Sampled solution of the Hamiltonian system.
#[derive(Debug, Clone, Serialize)]
pub struct OracleRun {
    pub t: Vec<f64>,
    pub g: Vec<GroupElement>,
    pub psi: Vec<[f64; 5]>,
    pub h: Vec<VerticalCoords>,
    pub u: Vec<[f64; 2]>,
    /// `M = h1 u1 + h2 u2`.
    pub m: Vec<f64>,
    /// Control switch times (polygons only).
    pub switches: Vec<f64>,
}

/// Largest defects of the first integrals and identities along a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct AuditReport {
    /// Drift of `h4`, `h5` and `E`.
    pub casimir_drift: f64,
    pub m_drift: f64,
    /// `|L(g) − M(0) t|/(1 + |t|)` for the linear integral `L`.
    pub linear_integral: f64,
    /// `‖ψ − ψ_closed(g)‖∞`.
    pub psi_closed_form: f64,
    /// `|h1 ḣ2 − ḣ1 h2 − M h3|` by fourth-order central differences.
    pub area_law: f64,
    /// Drift of `F_U(h1, h2)`.
    pub polar: f64,
}

impl AuditReport {
    pub fn max(&self) -> f64 {
        [self.casimir_drift, self.m_drift, self.linear_integral, self.psi_closed_form, self.area_law, self.polar]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

fn split(y: &[f64; 10]) -> (GroupElement, [f64; 5]) {
    (GroupElement::new(y[0], y[1], y[2], y[3], y[4]), [y[5], y[6], y[7], y[8], y[9]])
}

fn horizontal(y: &[f64; 10]) -> [f64; 2] {
    let (g, psi) = split(y);
    let f = left_invariant_frame(g);
    let dot = |row: &[f64; 5]| (0..5).map(|j| psi[j] * row[j]).sum::<f64>();
    [dot(&f[0]), dot(&f[1])]
}

/// `(ġ, ψ̇)` for a fixed control: `ġ = u1 X + u2 Y`, `ψ̇ = −∂H/∂g`.
fn hamiltonian_rhs(y: &[f64; 10], u: [f64; 2]) -> [f64; 10] {
    let (g, p) = split(y);
    let GroupElement { x, y: yy, .. } = g;
    let f = left_invariant_frame(g);
    let sixth = 2.0 * TWELFTH;
    let mut out = [0.0; 10];
    for j in 0..5 {
        out[j] = u[0] * f[0][j] + u[1] * f[1][j];
    }
    let dx = -u[0] * p[3] * yy * TWELFTH + u[1] * (HALF * p[2] + sixth * p[3] * x + TWELFTH * p[4] * yy);
    let dy = u[0] * (-HALF * p[2] - TWELFTH * p[3] * x - sixth * p[4] * yy) + u[1] * TWELFTH * p[4] * x;
    let dz = -HALF * (u[0] * p[3] + u[1] * p[4]);
    out[5] = -dx;
    out[6] = -dy;
    out[7] = -dz;
    out
}

fn check_inputs(phi: &CovectorInit, body: &ConvexBody, grid: &[f64], tol: f64) -> Result<(), OracleError> {
    if !(tol > 0.0) {
        return Err(OracleError::BadTolerance(tol));
    }
    if grid.first() != Some(&0.0) {
        return Err(OracleError::InvalidGrid("grid must start at t = 0".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(OracleError::InvalidGrid("grid must be finite and non-decreasing".into()));
    }
    if phi.phi1() == 0.0 && phi.phi2() == 0.0 {
        return Err(OracleError::ZeroHorizontal);
    }
    let defect = phi.polar_defect(body);
    if !(defect <= POLAR_TOL) {
        return Err(OracleError::NotOnPolar { defect });
    }
    Ok(())
}

/// Integrates the state and adjoint equations from `(e, φ)` and samples them on
/// `grid` (starting at 0, non-decreasing). `tol` is the accuracy target for the
/// sampled states and, for polygons, the switch-location tolerance.
pub fn integrate_hamiltonian(
    phi: &CovectorInit,
    body: &ConvexBody,
    grid: &[f64],
    tol: f64,
) -> Result<OracleRun, OracleError> {
    check_inputs(phi, body, grid, tol)?;
    let y0: [f64; 10] = std::array::from_fn(|i| if i < 5 { 0.0 } else { phi.phi[i - 5] });
    // Per-step tolerance scaled by the horizon, with two orders of headroom
    // so that endpoints are stable under halving `tol`.
    let horizon = grid.last().copied().unwrap_or(0.0).max(1.0);
    let opts = OdeOptions::with_tol(LOCAL_TOL_FACTOR * tol / horizon);
    let (states, controls, switches) = match body.vertices() {
        Some(vertices) => integrate_polygon(vertices, y0, grid, tol, &opts)?,
        None => {
            let control = |y: &[f64; 10]| match body.argmax_control(horizontal(y)) {
                Ok(face) => face.midpoint(),
                Err(_) => [f64::NAN, f64::NAN],
            };
            let f = |_t: f64, y: &[f64; 10]| hamiltonian_rhs(y, control(y));
            let states = ode::integrate_grid(&f, y0, grid, &opts)?;
            let controls = states.iter().map(control).collect();
            (states, controls, Vec::new())
        }
    };
    let mut run = OracleRun {
        t: grid.to_vec(),
        g: Vec::with_capacity(grid.len()),
        psi: Vec::with_capacity(grid.len()),
        h: Vec::with_capacity(grid.len()),
        u: controls,
        m: Vec::with_capacity(grid.len()),
        switches,
    };
    for (y, u) in states.iter().zip(&run.u) {
        let (g, psi) = split(y);
        let h = pair_with_frame(psi, g);
        run.m.push(h.h1 * u[0] + h.h2 * u[1]);
        run.g.push(g);
        run.psi.push(psi);
        run.h.push(h);
    }
    Ok(run)
}

/// Uniform-grid convenience wrapper.
pub fn integrate_uniform(
    phi: &CovectorInit,
    body: &ConvexBody,
    t_end: f64,
    nodes: usize,
    tol: f64,
) -> Result<OracleRun, OracleError> {
    integrate_hamiltonian(phi, body, &crate::solver::uniform_grid(t_end, nodes.max(1)), tol)
}

/// Active vertex for the direction `h`; on an edge normal the vertex ahead in
/// the direction of rotation `sign(h3)`.
fn initial_vertex(vertices: &[[f64; 2]], y: &[f64; 10], t: f64) -> Result<usize, OracleError> {
    let n = vertices.len();
    let h = horizontal(y);
    let (_, psi) = split(y);
    let score = |k: usize| h[0] * vertices[k][0] + h[1] * vertices[k][1];
    let best = (0..n).max_by(|&a, &b| score(a).total_cmp(&score(b))).unwrap();
    let scale = h[0].hypot(h[1]);
    for nb in [(best + 1) % n, (best + n - 1) % n] {
        if (score(nb) - score(best)).abs() <= 1e-12 * scale {
            let h3 = pair_with_frame(psi, split(y).0).h3;
            if h3.abs() <= STALL_H3 {
                return Err(OracleError::NonUniqueControlStall { t, h3 });
            }
            // Counterclockwise rotation activates the later vertex of the edge.
            let (lo, hi) = if nb == (best + 1) % n { (best, nb) } else { (nb, best) };
            return Ok(if h3 > 0.0 { hi } else { lo });
        }
    }
    Ok(best)
}

/// Steps shorter than this skip the hidden-crossing test.
const HIDDEN_CROSSING_MIN_STEP: f64 = 1e-9;

/// Whether the cubic Hermite model of the gain `h·(v_nb − v_k)` over a step
/// becomes positive strictly inside it.
fn hidden_crossing(y0: &[f64; 10], y1: &[f64; 10], hs: f64, vertices: &[[f64; 2]], k: usize, nb: usize) -> bool {
    let dv = [vertices[nb][0] - vertices[k][0], vertices[nb][1] - vertices[k][1]];
    let u = vertices[k];
    let value_rate = |y: &[f64; 10]| {
        let (g, psi) = split(y);
        let h = pair_with_frame(psi, g);
        // ḣ1 = −h3 u2, ḣ2 = h3 u1
        (h.h1 * dv[0] + h.h2 * dv[1], h.h3 * (-u[1] * dv[0] + u[0] * dv[1]))
    };
    let (g0, d0) = value_rate(y0);
    let (g1, d1) = value_rate(y1);
    let (m0, m1) = (d0 * hs, d1 * hs);
    (1..32).any(|i| {
        let s = i as f64 / 32.0;
        let (s2, s3) = (s * s, s * s * s);
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * g0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * g1 + (s3 - s2) * m1;
        v > 0.0
    })
}

/// Largest angular advance of `(h1, h2)` per step on a polygon.
const MAX_TURN_PER_STEP: f64 = 0.1;

/// Step length that turns `(h1, h2)` by about `MAX_TURN_PER_STEP`.
fn rotation_cap(y: &[f64; 10], u: [f64; 2]) -> f64 {
    let (g, psi) = split(y);
    let h = pair_with_frame(psi, g);
    let rate = h.h3.abs() * u[0].hypot(u[1]);
    let r = h.h1.hypot(h.h2);
    if rate > 0.0 { MAX_TURN_PER_STEP * r / rate } else { f64::INFINITY }
}

/// Local error tolerance per unit horizon, relative to the requested `tol`.
const LOCAL_TOL_FACTOR: f64 = 1e-2;

type PolygonRun = (Vec<[f64; 10]>, Vec<[f64; 2]>, Vec<f64>);

fn integrate_polygon(
    vertices: &[[f64; 2]],
    y0: [f64; 10],
    grid: &[f64],
    tol: f64,
    opts: &OdeOptions,
) -> Result<PolygonRun, OracleError> {
    let n = vertices.len();
    let mut k = initial_vertex(vertices, &y0, 0.0)?;
    let mut y = y0;
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    let mut states = vec![y0];
    let mut controls = vec![vertices[k]];
    let mut switches = Vec::new();
    // Positive when the neighbour beats the active vertex.
    let gain = |y: &[f64; 10], k: usize, nb: usize| {
        let hv = horizontal(y);
        hv[0] * (vertices[nb][0] - vertices[k][0]) + hv[1] * (vertices[nb][1] - vertices[k][1])
    };
    let mut steps = 0usize;
    for &target in &grid[1..] {
        while t < target {
            steps += 1;
            if steps > opts.max_steps {
                return Err(OdeError::TooManySteps { t, max_steps: opts.max_steps }.into());
            }
            let f = |_s: f64, y: &[f64; 10]| hamiltonian_rhs(y, vertices[k]);
            let hs = h.min(target - t).min(rotation_cap(&y, vertices[k]));
            let (y_new, err) = try_step(&f, t, &y, hs, opts);
            if !y_new.iter().all(|v| v.is_finite()) {
                return Err(OdeError::NonFinite { t }.into());
            }
            if err > 1.0 {
                h = hs * step_factor(err).min(1.0);
                if h < opts.h_min * (1.0 + t.abs()) {
                    return Err(OdeError::StepUnderflow { t, h }.into());
                }
                continue;
            }
            let (up, down) = ((k + 1) % n, (k + n - 1) % n);
            let crossed = [up, down].into_iter().find(|&nb| gain(&y_new, k, nb) > 0.0);
            // Near a turning point h can touch an edge normal and come back
            // within one step; shrink the step until the endpoints see it.
            if crossed.is_none()
                && hs > HIDDEN_CROSSING_MIN_STEP
                && [up, down].into_iter().any(|nb| hidden_crossing(&y, &y_new, hs, vertices, k, nb))
            {
                h = 0.5 * hs;
                continue;
            }
            match crossed {
                None => {
                    t = if hs == target - t { target } else { t + hs };
                    y = y_new;
                    h = hs * step_factor(err);
                }
                Some(nb) => {
                    // Bisect the step length for the crossing.
                    let (mut lo, mut hi) = (0.0, hs);
                    let mut y_hi = y_new;
                    while hi - lo > 0.01 * tol {
                        let mid = 0.5 * (lo + hi);
                        let (ym, _) = try_step(&f, t, &y, mid, opts);
                        if gain(&ym, k, nb) > 0.0 {
                            hi = mid;
                            y_hi = ym;
                        } else {
                            lo = mid;
                        }
                    }
                    t += hi;
                    y = y_hi;
                    let h3 = pair_with_frame(split(&y).1, split(&y).0).h3;
                    if h3.abs() <= STALL_H3 {
                        return Err(OracleError::NonUniqueControlStall { t, h3 });
                    }
                    k = nb;
                    switches.push(t);
                    h = hs.max(1e-6);
                }
            }
        }
        states.push(y);
        controls.push(vertices[k]);
    }
    Ok((states, controls, switches))
}

/// Maximal defects of the invariants along `run` for the initial covector `phi`.
pub fn verify_invariants(run: &OracleRun, phi: &CovectorInit, body: &ConvexBody) -> AuditReport {
    let mut rep = AuditReport::default();
    let Some(h0) = run.h.first() else { return rep };
    let m0 = run.m[0];
    let e0 = h0.energy();
    let f0 = body.support([h0.h1, h0.h2]);
    for i in 0..run.t.len() {
        let h = &run.h[i];
        let t = run.t[i];
        rep.casimir_drift = rep
            .casimir_drift
            .max((h.h4 - h0.h4).abs())
            .max((h.h5 - h0.h5).abs())
            .max((h.energy() - e0).abs());
        rep.m_drift = rep.m_drift.max((run.m[i] - m0).abs());
        rep.linear_integral = rep.linear_integral.max((linear_integral(phi, run.g[i]) - m0 * t).abs() / (1.0 + t.abs()));
        let pc = psi_closed_form(phi, run.g[i]);
        let d = (0..5).map(|j| (pc[j] - run.psi[i][j]).abs()).fold(0.0, f64::max);
        rep.psi_closed_form = rep.psi_closed_form.max(d);
        rep.polar = rep.polar.max((body.support([h.h1, h.h2]) - f0).abs());
    }
    rep.area_law = area_law_defect(run, m0);
    rep
}

fn area_law_defect(run: &OracleRun, m0: f64) -> f64 {
    let t = &run.t;
    let mut worst = 0.0f64;
    for i in 2..t.len().saturating_sub(2) {
        let step = t[i + 1] - t[i];
        if step <= 0.0 {
            continue;
        }
        let uniform = (i - 2..i + 2).all(|j| ((t[j + 1] - t[j]) - step).abs() <= 1e-9 * step.max(1.0));
        let across = run.switches.iter().any(|&s| s > t[i - 2] && s < t[i + 2]);
        if !uniform || across {
            continue;
        }
        let d = |f: &dyn Fn(&VerticalCoords) -> f64| {
            (f(&run.h[i - 2]) - 8.0 * f(&run.h[i - 1]) + 8.0 * f(&run.h[i + 1]) - f(&run.h[i + 2])) / (12.0 * step)
        };
        let dh1 = d(&|h| h.h1);
        let dh2 = d(&|h| h.h2);
        let h = &run.h[i];
        worst = worst.max((h.h1 * dh2 - dh1 * h.h2 - m0 * h.h3).abs());
    }
    worst
}

/// Control face at `(h1, h2)`, exposed for diagnostics.
pub fn control_face(body: &ConvexBody, h: &VerticalCoords) -> Result<ControlFace, OracleError> {
    Ok(body.argmax_control([h.h1, h.h2])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::uniform_grid;
    use std::f64::consts::PI;

    #[test]
    fn circle_endpoint() {
        let d = ConvexBody::disc(1.0).unwrap();
        let phi = CovectorInit::new([1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let run = integrate_hamiltonian(&phi, &d, &uniform_grid(2.0 * PI, 1001), 1e-11).unwrap();
        let g = run.g.last().unwrap();
        assert!(g.x.abs() < 1e-8 && g.y.abs() < 1e-8 && (g.z - PI).abs() < 1e-8, "{g:?}");
        let rep = verify_invariants(&run, &phi, &d);
        assert!(rep.max() < 1e-7, "{rep:?}");
    }

    #[test]
    fn zero_length_run_is_clean() {
        let d = ConvexBody::disc(1.0).unwrap();
        let phi = CovectorInit::new([0.6, 0.8, 0.3, -0.2, 0.5]).unwrap();
        let run = integrate_hamiltonian(&phi, &d, &[0.0], 1e-10).unwrap();
        assert_eq!(verify_invariants(&run, &phi, &d), AuditReport::default());
    }

    #[test]
    fn square_switches_at_corners() {
        let sq = ConvexBody::unit_square();
        // φ = (1, 0, 1, 0, 0): (h1, h2) runs along the polar diamond.
        let phi = CovectorInit::new([0.5, 0.5, 1.0, 0.0, 0.0]).unwrap();
        let run = integrate_hamiltonian(&phi, &sq, &uniform_grid(4.0, 41), 1e-11).unwrap();
        assert!(!run.switches.is_empty());
        let g = run.g.last().unwrap();
        assert!(g.x.abs() < 1e-8 && g.y.abs() < 1e-8 && (g.z - 2.0).abs() < 1e-8, "{g:?}");
    }

    #[test]
    fn stall_on_edge_normal() {
        let sq = ConvexBody::unit_square();
        let phi = CovectorInit::new([1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            integrate_hamiltonian(&phi, &sq, &[0.0, 1.0], 1e-10),
            Err(OracleError::NonUniqueControlStall { .. })
        ));
    }

    #[test]
    fn rejects_bad_input() {
        let d = ConvexBody::disc(1.0).unwrap();
        let phi = CovectorInit::new([2.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(integrate_hamiltonian(&phi, &d, &[0.0, 1.0], 1e-10), Err(OracleError::NotOnPolar { .. })));
        let phi = CovectorInit::new([1.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(integrate_hamiltonian(&phi, &d, &[0.0, 1.0], 0.0), Err(OracleError::BadTolerance(_))));
    }
}
