//! Classification of extremals, the angle law `θ(t)` and reconstruction of
//! trajectories from it.
//!
//! Normal extremals with `M = 1` are parametrized by the polar angle `θ` of
//! `(h1, h2) ∈ ∂U*`. Along them `r⁴θ̇² = rad(θ) = 2(E − ℓ·h(θ))` with
//! `ℓ = (φ5, −φ4)`, so `θ(t)` is built from monotone branches of
//! `t(θ) = ∫ r²/√rad`, constant (dwell) segments where `rad` vanishes, and a
//! periodic tail. Integrals are evaluated in auxiliary variables that remove the
//! `1/√` endpoint singularities (`θ = θᵢ ± τ²`) or map a divergent endpoint to
//! infinity (`θ = θᵢ ± e^{−s}`).

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{group_mul, GroupElement, HALF, TWELFTH};
use crate::convex::{control_from_polar, wrap_angle, AngleArc, BodySpec, ControlFace, ConvexBody, ConvexError};
use crate::hamiltonian::{
    self, energy_bounds, h_from_state, CovectorInit, EnergyBounds, HamiltonianError, VerticalCoords, POLAR_TOL,
};
use crate::numeric::ode::{self, OdeError, OdeOptions};
use crate::numeric::quad::{self, QuadError, QuadOptions};
use crate::numeric::roots::brent;

/// Relative tolerance for deciding `E = E₀` or `E = E₋₁`.
pub const ENERGY_TOL: f64 = 1e-10;
/// Tolerance of the "radicand vanishes here" precondition.
pub const ZERO_TOL: f64 = 1e-10;
/// Divergent ends are truncated this close (relative) to the zero.
const NEAR_ZERO: f64 = 1e-8;
/// Within this distance of a simple zero the radicand is integrated from its
/// derivative instead of evaluated directly (which cancels catastrophically).
const NEAR_ZERO_SPAN: f64 = 0.05;
const ARC_TOL: f64 = 1e-12;
/// Corners this close to a zero are taken to be that zero.
const CORNER_TOL: f64 = 1e-10;
const MAX_PIECES: usize = 100_000;
const TABLE_NODES: usize = 16;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("(phi1, phi2) is off the polar curve: |F_U(phi1, phi2) - 1| = {defect:e}")]
    NotOnPolar { defect: f64 },
    #[error("abnormal covectors need phi1 = phi2 = phi3 = 0 and (phi4, phi5) != 0")]
    InvalidAbnormal,
    #[error("abnormal sign must be +1 or -1, got {0}")]
    InvalidSign(f64),
    #[error("radicand is negative on the way to theta = {theta}")]
    ForbiddenRegion { theta: f64 },
    #[error("improper integral diverges at theta = {theta}")]
    DivergentIntegral { theta: f64 },
    #[error("start state violates the constant-angle relations (defect {defect:e})")]
    InconsistentStartState { defect: f64 },
    #[error("Casimir energy vanishes")]
    ZeroEnergy,
    #[error("operation requires {expected}, got {actual}")]
    WrongCase { expected: &'static str, actual: String },
    #[error("vanishing order at theta = {theta} is ambiguous (fitted slope {slope})")]
    AmbiguousOrder { theta: f64, slope: f64 },
    #[error("theta = {theta} is not a zero of the radicand (theta rate squared {value:e})")]
    NotAZero { theta: f64, value: f64 },
    #[error("invalid dwell schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("quadrature failed at {at}: {source}")]
    Quadrature { at: f64, source: QuadError },
    #[error(transparent)]
    Integration(#[from] OdeError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

type Result<T> = std::result::Result<T, SolverError>;

/// Which one-parameter subgroup an abnormal extremal follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbnormalPattern {
    /// `φ5 = 0`: motion along `Y`.
    AlongY,
    /// `φ4 = 0`: motion along `X`.
    AlongX,
    /// `φ4 φ5 ≠ 0`: motion along `φ5 X − φ4 Y`.
    Oblique,
}

/// Type of an extremal together with the data that type carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum CaseLabel {
    Abnormal { pattern: AbnormalPattern },
    /// `φ3 = φ4 = φ5 = 0`: constant angle, metric straight line.
    StraightLine,
    /// `φ4 = φ5 = 0 ≠ φ3`: periodic projection on an isoperimetrix.
    Periodic { period: f64 },
    /// `E > E₀`: `θ` strictly monotone.
    Monotone,
    /// `φ3 = 0`, `E = E₋₁`: constant angle at the minimum of `ℓ·h`.
    MinEnergyLine,
    /// `E₋₁ < E < E₀`: `θ` oscillates between two turning points.
    Oscillating { theta1: f64, theta2: f64, t1: f64, t2: f64 },
    /// `φ3 ≠ 0`, `E = E₀`: `θ` runs towards the nearest zeros `θ1 < θ0 < θ2`.
    /// `t_i` is absent when the improper integral diverges.
    Separatrix {
        theta1: f64,
        theta2: f64,
        t1: Option<f64>,
        t2: Option<f64>,
        convergent1: bool,
        convergent2: bool,
    },
    /// `φ3 = 0`, `E = E₀`: `θ0` lies on the maximal segment `[θ1, θ2]` of zeros.
    SeparatrixAtRest { theta1: f64, theta2: f64, convergent_below: bool, convergent_above: bool },
}

impl CaseLabel {
    pub fn name(&self) -> &'static str {
        match self {
            CaseLabel::Abnormal { .. } => "abnormal",
            CaseLabel::StraightLine => "straight_line",
            CaseLabel::Periodic { .. } => "periodic",
            CaseLabel::Monotone => "monotone",
            CaseLabel::MinEnergyLine => "min_energy_line",
            CaseLabel::Oscillating { .. } => "oscillating",
            CaseLabel::Separatrix { .. } => "separatrix",
            CaseLabel::SeparatrixAtRest { .. } => "separatrix_at_rest",
        }
    }
}

/// Vanishing order of the radicand at a zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroOrder {
    /// Order one: the improper time integral converges.
    Simple,
    /// Order two or more: the integral diverges.
    Higher,
}

/// A constant-angle interval inserted at the `arrival`-th zero reached for
/// `t > 0` (`arrival = 0` is the start when `θ0` itself is a zero). After the
/// dwell the motion continues in the same direction, or turns back when
/// `reverse` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellEntry {
    pub arrival: usize,
    pub duration: f64,
    #[serde(default)]
    pub reverse: bool,
}

/// Closed forms of a constant-angle segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellForm {
    /// `φ5 ≠ 0`.
    General,
    /// `φ5 = 0`, `φ4 ≠ 0`.
    Phi5Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    StraightLine,
    Periodic,
    Monotone,
    MinEnergyLine,
    Oscillating,
    Separatrix,
    SeparatrixAtRest,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EndKind {
    Regular,
    /// Simple zero; `k` is the slope of the radicand moving into the branch.
    Simple { k: f64 },
    Divergent,
}

/// Validated normal problem with its regime.
#[derive(Debug, Clone)]
struct Setup {
    phi: CovectorInit,
    body: ConvexBody,
    energy: f64,
    bounds: Option<EnergyBounds>,
    regime: Regime,
    /// `(E₀, u*)` when the radicand is evaluated through the support gap.
    gap: Option<(f64, [f64; 2])>,
}

impl Setup {
    fn new(phi: &CovectorInit, body: &ConvexBody) -> Result<Self> {
        let defect = phi.polar_defect(body);
        if !(defect <= POLAR_TOL) {
            return Err(SolverError::NotOnPolar { defect });
        }
        let energy = phi.energy();
        let p3 = phi.phi3();
        let mut gap = None;
        let (bounds, regime) = if !phi.has_vertical_casimirs() {
            (None, if p3 == 0.0 { Regime::StraightLine } else { Regime::Periodic })
        } else {
            let b = energy_bounds(phi, body)?;
            let tol = ENERGY_TOL * energy.abs().max(1.0);
            let regime = if energy > b.e_max + tol {
                if p3 == 0.0 {
                    return Err(SolverError::Internal("E > E0 with phi3 = 0".into()));
                }
                Regime::Monotone
            } else if (energy - b.e_max).abs() <= tol {
                gap = Some((b.e_max, body.extreme_point(phi.ell())));
                if p3 == 0.0 {
                    Regime::SeparatrixAtRest
                } else {
                    Regime::Separatrix
                }
            } else if energy - b.e_min <= tol {
                if energy < b.e_min - tol || 0.5 * p3 * p3 > tol {
                    return Err(SolverError::Internal(format!("E = {energy} below E-1 = {}", b.e_min)));
                }
                Regime::MinEnergyLine
            } else {
                Regime::Oscillating
            };
            (Some(b), regime)
        };
        Ok(Self { phi: *phi, body: body.clone(), energy, bounds, regime, gap })
    }

    fn bounds(&self) -> EnergyBounds {
        self.bounds.expect("regime with vertical Casimirs")
    }

    fn g(&self, theta: f64) -> f64 {
        let h = self.body.polar_point(theta);
        let l = self.phi.ell();
        l[0] * h[0] + l[1] * h[1]
    }

    fn rad(&self, theta: f64) -> f64 {
        match self.gap {
            // 2(E₀ − ℓ·h) = 2E₀(F_U(e) − u*·e)/F_U(e)
            Some((e0, us)) => 2.0 * e0 * self.body.support_gap(theta, us) * self.body.polar_radius(theta),
            None => hamiltonian::radicand(&self.phi, &self.body, theta),
        }
    }

    /// Radicand at `anchor + d` near a zero `anchor` as `∫ rad′` over the span
    /// (5-point Gauss–Legendre); falls back to [`Self::rad`] when the span is
    /// long or crosses a corner.
    fn rad_from_zero(&self, anchor: f64, d: f64) -> f64 {
        self.rad_increment(anchor, d).unwrap_or_else(|| self.rad(anchor + d))
    }

    /// As [`Self::rad_from_zero`] from a regular point: `rad(anchor) + ∫ rad′`.
    /// Keeps the integrand smooth in `d` when the whole span is a few ulps of
    /// the absolute angle wide.
    fn rad_from(&self, anchor: f64, d: f64) -> f64 {
        match self.rad_increment(anchor, d) {
            Some(inc) => self.rad(anchor) + inc,
            None => self.rad(anchor + d),
        }
    }

    fn rad_increment(&self, anchor: f64, d: f64) -> Option<f64> {
        const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const W: [f64; 5] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1, 0.236_926_885_056_189_1];
        // The anchor may itself be a corner, up to rounding.
        let inner = self.body.corners_between(anchor, anchor + d).into_iter().any(|c| (c - anchor).abs() > CORNER_TOL);
        if d.abs() > NEAR_ZERO_SPAN || inner {
            return None;
        }
        let half = 0.5 * d;
        Some(half * X.iter().zip(W).map(|(x, w)| w * self.slope(anchor + half * (1.0 + x), d.signum())).sum::<f64>())
    }

    /// Radicand at `anchor + d` next to a divergent zero `anchor`.
    fn rad_near(&self, anchor: f64, d: f64) -> f64 {
        if let Some((e0, us)) = self.gap {
            if let Some(gap) = self.body.support_gap_near(anchor, d, us) {
                return 2.0 * e0 * gap * self.body.polar_radius(anchor + d);
            }
        }
        self.rad(anchor + d)
    }

    fn slope(&self, theta: f64, side: f64) -> f64 {
        hamiltonian::radicand_slope(&self.phi, &self.body, theta, side)
    }

    /// Control on a constant-angle segment: `ℓ/E`.
    fn dwell_control(&self) -> [f64; 2] {
        let e = match self.regime {
            Regime::MinEnergyLine => self.bounds().e_min,
            _ => self.bounds().e_max,
        };
        let l = self.phi.ell();
        [l[0] / e, l[1] / e]
    }

    /// Fitted vanishing order of the radicand at `theta` on one side; `None`
    /// when it vanishes identically there.
    fn side_order(&self, theta: f64, side: f64) -> Result<Option<ZeroOrder>> {
        let deltas = [1e-3, 1e-4, 1e-5, 1e-6];
        let mut pts = [(0.0, 0.0); 4];
        for (p, d) in pts.iter_mut().zip(deltas) {
            let v = self.rad(theta + side * d).abs();
            if v == 0.0 {
                return Ok(None);
            }
            *p = (d.ln(), v.ln());
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        if slope <= 1.2 {
            Ok(Some(ZeroOrder::Simple))
        } else if slope >= 1.8 {
            Ok(Some(ZeroOrder::Higher))
        } else {
            Err(SolverError::AmbiguousOrder { theta, slope })
        }
    }

    /// Behaviour of the radicand next to a zero on `side`; `None` when it
    /// vanishes identically there (flat arc).
    fn side_kind(&self, theta: f64, side: f64) -> Result<Option<EndKind>> {
        Ok(match self.side_order(theta, side)? {
            None => None,
            Some(ZeroOrder::Higher) => Some(EndKind::Divergent),
            Some(ZeroOrder::Simple) => Some(EndKind::Simple { k: side * self.slope(theta, side) }),
        })
    }

    /// End kind when arriving at the zero `theta` moving in direction `dir`.
    fn arrival_kind(&self, theta: f64, dir: f64) -> Result<EndKind> {
        let side = -dir;
        if self.regime == Regime::Oscillating {
            let k = side * self.slope(theta, side);
            if !(k > 0.0) {
                return Err(SolverError::Internal(format!("turning point {theta} is not a simple zero")));
            }
            return Ok(EndKind::Simple { k });
        }
        self.side_kind(theta, side)?
            .ok_or_else(|| SolverError::Internal(format!("arrived at {theta} along a flat arc")))
    }

    /// First zero of the radicand met when moving from `from` in direction
    /// `dir`; `at_zero` skips the zero set `from` currently sits on.
    fn next_zero(&self, from: f64, dir: f64, at_zero: bool) -> Result<Option<f64>> {
        match self.regime {
            Regime::Separatrix | Regime::SeparatrixAtRest => {
                Ok(Some(arc_ahead(self.bounds().max_arc, from, dir, at_zero).0))
            }
            Regime::Oscillating => {
                let b = self.bounds();
                let (m_near, _) = arc_ahead(b.max_arc, from, dir, false);
                let (n_near, n_far) = arc_ahead(b.min_arc, from, dir, false);
                let lower = if (n_near - from) * dir <= (m_near - from) * dir { n_far } else { from };
                let e = self.energy;
                let z = brent(|t| self.g(t) - e, lower, m_near, 0.0)
                    .ok_or_else(|| SolverError::Internal(format!("no turning point between {lower} and {m_near}")))?;
                if at_zero && (z - from).abs() <= ARC_TOL {
                    return Err(SolverError::Internal(format!("turning point search stalled at {from}")));
                }
                Ok(Some(z))
            }
            _ => Ok(None),
        }
    }

    /// Direction in which motion can start from a turning point at rest.
    fn departure_from_rest(&self, theta: f64) -> Result<(f64, EndKind)> {
        for dir in [1.0, -1.0] {
            let k = dir * self.slope(theta, dir);
            if k > 0.0 {
                return Ok((dir, EndKind::Simple { k }));
            }
        }
        Err(SolverError::Internal(format!("no admissible direction at rest at {theta}")))
    }
}

/// First occurrence of `arc` (lifted to the universal cover) met when moving
/// from `from` in direction `dir`: returns the near and far ends. When
/// `skip_current` is set and `from` lies on an occurrence, the next one is
/// returned.
fn arc_ahead(arc: AngleArc, from: f64, dir: f64, skip_current: bool) -> (f64, f64) {
    if dir < 0.0 {
        let mirrored = AngleArc::new(-arc.end, -arc.start);
        let (a, b) = arc_ahead(mirrored, -from, 1.0, skip_current);
        return (-a, -b);
    }
    let len = arc.end - arc.start;
    let mut s = arc.start + TAU * ((from - arc.start) / TAU).floor();
    if s + TAU - from <= ARC_TOL {
        s += TAU;
    }
    let inside = from >= s - ARC_TOL && from <= s + len + ARC_TOL;
    if inside && !skip_current {
        (from, s + len)
    } else {
        (s + TAU, s + len + TAU)
    }
}

fn quad_opts() -> QuadOptions {
    QuadOptions::tol(1e-14, 1e-13)
}

/// Half of a monotone branch, between an end `anchor` and the branch midpoint.
/// The variable `w` increases with time. Leading halves run from the anchor
/// (`w = 0`) to the midpoint (`w = 1`); trailing halves from the midpoint
/// (`w = 0`) to the anchor (`w = 1`, or `w → ∞` for a divergent end, truncated
/// at `w_end`).
#[derive(Debug, Clone)]
struct Half {
    anchor: f64,
    mid: f64,
    kind: EndKind,
    leading: bool,
    w_end: f64,
    breaks: Vec<f64>,
    nodes: Vec<f64>,
    times: Vec<f64>,
}

impl Half {
    fn build(s: &Setup, anchor: f64, mid: f64, kind: EndKind, leading: bool) -> Result<Self> {
        if leading && kind == EndKind::Divergent {
            return Err(SolverError::Internal("branch cannot start at a divergent zero".into()));
        }
        let delta = (mid - anchor).abs();
        let w_end = match kind {
            EndKind::Divergent => (delta / (NEAR_ZERO * delta.max(1.0))).ln().max(1.0),
            _ => 1.0,
        };
        let mut half =
            Self { anchor, mid, kind, leading, w_end, breaks: Vec::new(), nodes: Vec::new(), times: Vec::new() };
        half.breaks = half.corner_ws(s);
        let mut nodes: Vec<f64> = if kind == EndKind::Divergent {
            let n = (w_end / 0.5).ceil() as usize;
            (0..=n).map(|i| (i as f64 * 0.5).min(w_end)).collect()
        } else {
            (0..=TABLE_NODES)
                .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / TABLE_NODES as f64).cos()))
                .collect()
        };
        nodes.extend_from_slice(&half.breaks);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let mut times = Vec::with_capacity(nodes.len());
        times.push(0.0);
        for w in nodes.windows(2) {
            let dt = half.time_between(s, w[0], w[1])?;
            times.push(times.last().unwrap() + dt);
        }
        half.nodes = nodes;
        half.times = times;
        Ok(half)
    }

    fn delta(&self) -> f64 {
        self.mid - self.anchor
    }

    /// `q = (θ − anchor)/(mid − anchor)` and `dq/dw`.
    fn q(&self, w: f64) -> (f64, f64) {
        match (self.leading, self.kind) {
            (true, EndKind::Simple { .. }) => (w * w, 2.0 * w),
            (true, _) => (w, 1.0),
            (false, EndKind::Regular) => (1.0 - w, -1.0),
            (false, EndKind::Simple { .. }) => ((1.0 - w).powi(2), -2.0 * (1.0 - w)),
            (false, EndKind::Divergent) => {
                let e = (-w).exp();
                (e, -e)
            }
        }
    }

    fn w_of_q(&self, q: f64) -> f64 {
        match (self.leading, self.kind) {
            (true, EndKind::Simple { .. }) => q.sqrt(),
            (true, _) => q,
            (false, EndKind::Regular) => 1.0 - q,
            (false, EndKind::Simple { .. }) => 1.0 - q.sqrt(),
            (false, EndKind::Divergent) => -q.ln(),
        }
    }

    fn theta(&self, w: f64) -> f64 {
        if !self.leading && w >= self.w_end && self.kind != EndKind::Divergent {
            return self.anchor;
        }
        self.anchor + self.delta() * self.q(w).0
    }

    /// Points where the integrand is not smooth (polar corners).
    fn corner_ws(&self, s: &Setup) -> Vec<f64> {
        let mut ws: Vec<f64> = s
            .body
            .corners_between(self.anchor, self.mid)
            .into_iter()
            .filter(|c| (c - self.anchor).abs() > CORNER_TOL && (c - self.mid).abs() > CORNER_TOL)
            .map(|c| self.w_of_q((c - self.anchor) / self.delta()))
            .collect();
        ws.retain(|w| *w > 0.0 && *w < self.w_end);
        ws
    }

    /// `θ(w)` and `|dθ/dw|/√rad(θ)`.
    fn weight(&self, s: &Setup, w: f64) -> (f64, f64) {
        let delta = self.delta();
        let (q, dq) = self.q(w);
        let theta = self.anchor + delta * q;
        let rad = match self.kind {
            EndKind::Simple { k } => {
                let rad = s.rad_from_zero(self.anchor, delta * q);
                if !(rad > 0.0) || q == 0.0 {
                    // At the zero itself: limit of |Δ q′|/√(k|Δ| q).
                    return (theta, 2.0 * delta.abs().sqrt() / k.sqrt());
                }
                rad
            }
            EndKind::Divergent => s.rad_near(self.anchor, delta * q),
            EndKind::Regular => s.rad_from(self.anchor, delta * q),
        };
        let jac = if rad > 0.0 { (delta * dq).abs() / rad.sqrt() } else { f64::NAN };
        (theta, jac)
    }

    fn time_between(&self, s: &Setup, a: f64, b: f64) -> Result<f64> {
        quad::integrate_with_breaks(
            |w| {
                let (th, jac) = self.weight(s, w);
                s.body.polar_radius(th).powi(2) * jac
            },
            a,
            b,
            &self.breaks,
            quad_opts(),
        )
        .map_err(|source| SolverError::Quadrature { at: self.theta(a), source })
    }

    fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Inverts the time table: `w` with `t(w) = tau`, `0 ≤ tau ≤ duration`.
    fn locate(&self, s: &Setup, tau: f64) -> Result<f64> {
        if tau <= 0.0 {
            return Ok(0.0);
        }
        if tau >= self.duration() {
            return Ok(self.w_end);
        }
        let i = self.times.partition_point(|&t| t <= tau).saturating_sub(1).min(self.nodes.len() - 2);
        let (w0, t0) = (self.nodes[i], self.times[i]);
        let mut err = None;
        let w = brent(
            |w| match self.time_between(s, w0, w) {
                Ok(v) => t0 + v - tau,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            w0,
            self.nodes[i + 1],
            1e-15,
        );
        if let Some(e) = err {
            return Err(e);
        }
        w.ok_or_else(|| SolverError::Internal(format!("time table does not bracket t = {tau}")))
    }
}

/// Monotone branch of `θ(t)` from `theta_a` (at `t = 0`) to `theta_b`.
#[derive(Debug, Clone)]
struct Branch {
    theta_b: f64,
    dir: f64,
    halves: [Half; 2],
    duration: f64,
}

/// Position inside a branch.
#[derive(Debug, Clone, Copy)]
struct BranchPos {
    half: usize,
    w: f64,
    /// Past the truncated part of a divergent end: `θ` is frozen at `theta_b`.
    tail: bool,
}

impl Branch {
    fn new(s: &Setup, theta_a: f64, kind_a: EndKind, theta_b: f64, kind_b: EndKind) -> Result<Self> {
        if theta_a == theta_b {
            return Err(SolverError::Internal("empty branch".into()));
        }
        let mid = 0.5 * (theta_a + theta_b);
        let h0 = Half::build(s, theta_a, mid, kind_a, true)?;
        let h1 = Half::build(s, theta_b, mid, kind_b, false)?;
        let duration =
            if kind_b == EndKind::Divergent { f64::INFINITY } else { h0.duration() + h1.duration() };
        Ok(Self { theta_b, dir: (theta_b - theta_a).signum(), halves: [h0, h1], duration })
    }

    fn half_start(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else {
            self.halves[0].duration()
        }
    }

    /// Time at which the truncated part ends (finite even for divergent ends).
    fn finite_end(&self) -> f64 {
        self.halves[0].duration() + self.halves[1].duration()
    }

    fn locate(&self, s: &Setup, tau: f64) -> Result<BranchPos> {
        let d0 = self.halves[0].duration();
        if tau < d0 {
            return Ok(BranchPos { half: 0, w: self.halves[0].locate(s, tau)?, tail: false });
        }
        let h1 = &self.halves[1];
        if tau - d0 >= h1.duration() {
            return Ok(BranchPos { half: 1, w: h1.w_end, tail: h1.kind == EndKind::Divergent });
        }
        Ok(BranchPos { half: 1, w: h1.locate(s, tau - d0)?, tail: false })
    }

    fn theta_at(&self, s: &Setup, tau: f64) -> Result<f64> {
        let p = self.locate(s, tau)?;
        if p.tail {
            return Ok(self.theta_b);
        }
        Ok(self.halves[p.half].theta(p.w))
    }
}

#[derive(Debug, Clone)]
enum Piece {
    Branch { branch: Box<Branch>, t0: f64 },
    Dwell { theta: f64, t0: f64, t1: f64 },
}

impl Piece {
    fn t0(&self) -> f64 {
        match self {
            Piece::Branch { t0, .. } | Piece::Dwell { t0, .. } => *t0,
        }
    }

    fn t1(&self) -> f64 {
        match self {
            Piece::Branch { branch, t0 } => t0 + branch.duration,
            Piece::Dwell { t1, .. } => *t1,
        }
    }
}

/// Pieces `pieces[first..]` repeat forever, shifted by `dt` in time and
/// `dtheta` in angle.
#[derive(Debug, Clone, Copy)]
struct Cycle {
    first: usize,
    dt: f64,
    dtheta: f64,
}

/// `θ` for `t ≥ 0` (or `−t ≥ 0` for the backward walk).
#[derive(Debug, Clone)]
struct Walk {
    pieces: Vec<Piece>,
    cycle: Option<Cycle>,
}

impl Walk {
    fn constant(theta: f64) -> Self {
        Self { pieces: vec![Piece::Dwell { theta, t0: 0.0, t1: f64::INFINITY }], cycle: None }
    }

    /// Piece index, time shift and angle shift for time `t ≥ 0`.
    fn locate(&self, t: f64) -> (usize, f64, f64) {
        let (t, k, range) = match self.cycle {
            Some(c) if t >= self.pieces[c.first].t0() => {
                let start = self.pieces[c.first].t0();
                let k = ((t - start) / c.dt).floor();
                (t - k * c.dt, k, c.first..self.pieces.len())
            }
            _ => (t, 0.0, 0..self.pieces.len()),
        };
        let slice = &self.pieces[range.clone()];
        let j = slice.partition_point(|p| p.t0() <= t).saturating_sub(1);
        let (dt, dth) = self.cycle.map_or((0.0, 0.0), |c| (k * c.dt, k * c.dtheta));
        (range.start + j, dt, dth)
    }

    fn theta_at(&self, s: &Setup, t: f64) -> Result<f64> {
        let (i, dt, dth) = self.locate(t);
        let local = t - dt;
        Ok(dth
            + match &self.pieces[i] {
                Piece::Dwell { theta, .. } => *theta,
                Piece::Branch { branch, t0 } => branch.theta_at(s, (local - t0).min(branch.duration))?,
            })
    }

    /// Visits the pieces overlapping `[0, t_end]` in order with their shifts.
    fn visit<F: FnMut(&Piece, f64, f64) -> Result<()>>(&self, t_end: f64, mut f: F) -> Result<()> {
        for p in &self.pieces {
            if p.t0() > t_end {
                return Ok(());
            }
            f(p, 0.0, 0.0)?;
        }
        if let Some(c) = self.cycle {
            if !(c.dt > 0.0) {
                return Err(SolverError::Internal("cycle without duration".into()));
            }
            for k in 1.. {
                let (dt, dth) = (k as f64 * c.dt, k as f64 * c.dtheta);
                for p in &self.pieces[c.first..] {
                    if p.t0() + dt > t_end {
                        return Ok(());
                    }
                    f(p, dt, dth)?;
                }
            }
        }
        Ok(())
    }
}

fn build_walk(s: &Setup, schedule: &[DwellEntry], forward: bool) -> Result<Walk> {
    let theta0 = s.phi.theta0();
    let p3 = s.phi.phi3();
    let schedule: &[DwellEntry] = if forward { schedule } else { &[] };
    let sched_err = |m: String| Err(SolverError::InvalidSchedule(m));
    let time_sign = if forward { 1.0 } else { -1.0 };

    match s.regime {
        Regime::StraightLine | Regime::MinEnergyLine => {
            if !schedule.is_empty() {
                return sched_err("the angle is constant for this covector".into());
            }
            return Ok(Walk::constant(theta0));
        }
        Regime::Periodic | Regime::Monotone => {
            if !schedule.is_empty() {
                return sched_err("the radicand has no zeros for this covector".into());
            }
            let dir = p3.signum() * time_sign;
            let b = Branch::new(s, theta0, EndKind::Regular, theta0 + TAU * dir, EndKind::Regular)?;
            let dt = b.duration;
            return Ok(Walk {
                pieces: vec![Piece::Branch { branch: Box::new(b), t0: 0.0 }],
                cycle: Some(Cycle { first: 0, dt, dtheta: TAU * dir }),
            });
        }
        _ => {}
    }

    let mut pieces = Vec::new();
    let mut t = 0.0;
    let mut used = vec![false; schedule.len()];
    let entry_at = |k: usize| schedule.iter().position(|e| e.arrival == k);
    let mut theta = theta0;

    let (mut dir, mut kind) = if p3 != 0.0 {
        (p3.signum() * time_sign, EndKind::Regular)
    } else if s.regime == Regime::Oscillating {
        s.departure_from_rest(theta0)?
    } else {
        // At rest on the maximal arc: leave only on request.
        let Some(i) = entry_at(0) else {
            if !schedule.is_empty() {
                return sched_err("only a departure entry (arrival 0) applies at rest".into());
            }
            return Ok(Walk::constant(theta0));
        };
        used[i] = true;
        let e = schedule[i];
        let dir = if e.reverse { -1.0 } else { 1.0 };
        let (_, far) = arc_ahead(s.bounds().max_arc, theta0, dir, false);
        if (far - theta0) * dir > ARC_TOL {
            return sched_err(format!("theta0 is inside the flat arc and cannot move in direction {dir}"));
        }
        match s.side_kind(theta0, dir)? {
            Some(k @ EndKind::Simple { .. }) => {
                if e.duration > 0.0 {
                    pieces.push(Piece::Dwell { theta: theta0, t0: 0.0, t1: e.duration });
                    t = e.duration;
                }
                (dir, k)
            }
            _ => return sched_err("cannot depart from a zero with a divergent time integral".into()),
        }
    };
    let mut at_zero = p3 == 0.0;
    let last_scheduled = schedule.iter().map(|e| e.arrival).max().unwrap_or(0);
    let mut arrivals = 0usize;
    let mut seen: Vec<(f64, f64, usize, f64, f64)> = Vec::new();
    let mut cycle = None;

    loop {
        if pieces.len() > MAX_PIECES {
            return Err(SolverError::Internal("angle law did not become periodic".into()));
        }
        let z = s
            .next_zero(theta, dir, at_zero)?
            .ok_or_else(|| SolverError::Internal("expected a zero of the radicand".into()))?;
        let arrive = s.arrival_kind(z, dir)?;
        let b = Branch::new(s, theta, kind, z, arrive)?;
        let dur = b.duration;
        pieces.push(Piece::Branch { branch: Box::new(b), t0: t });
        if arrive == EndKind::Divergent {
            break;
        }
        t += dur;
        arrivals += 1;
        let entry = entry_at(arrivals);
        if let Some(i) = entry {
            used[i] = true;
        }
        let (new_dir, dwell) = if s.regime == Regime::Oscillating {
            if entry.is_some() {
                return sched_err(format!("arrival {arrivals} is a turning point; dwells need E = E0"));
            }
            (-dir, 0.0)
        } else {
            let passable = s.bounds().max_arc.is_point();
            match entry.map(|i| schedule[i]) {
                Some(e) if !e.reverse && !passable => {
                    return sched_err(format!("arrival {arrivals} is the end of a flat arc; only reverse is possible"));
                }
                Some(e) => (if e.reverse { -dir } else { dir }, e.duration),
                None => (if passable { dir } else { -dir }, 0.0),
            }
        };
        let depart = if s.regime == Regime::Oscillating { Some(arrive) } else { s.side_kind(z, new_dir)? };
        let depart = match depart {
            Some(k @ EndKind::Simple { .. }) => k,
            _ => {
                if entry.is_some() {
                    return sched_err(format!("cannot leave zero {z} in direction {new_dir} in finite time"));
                }
                pieces.push(Piece::Dwell { theta: z, t0: t, t1: f64::INFINITY });
                break;
            }
        };
        if dwell > 0.0 {
            pieces.push(Piece::Dwell { theta: z, t0: t, t1: t + dwell });
            t += dwell;
        }
        if arrivals >= last_scheduled {
            let key = wrap_angle(z);
            let hit = seen.iter().find(|e| {
                let d = (e.0 - key).abs();
                d.min(TAU - d) <= 1e-9 && e.1 == new_dir
            });
            if let Some(&(_, _, first, t_prev, th_prev)) = hit {
                cycle = Some(Cycle { first, dt: t - t_prev, dtheta: z - th_prev });
                break;
            }
            seen.push((key, new_dir, pieces.len(), t, z));
        }
        theta = z;
        dir = new_dir;
        kind = depart;
        at_zero = true;
    }
    if let Some(i) = used.iter().position(|u| !u) {
        return sched_err(format!("arrival {} is never reached", schedule[i].arrival));
    }
    Ok(Walk { pieces, cycle })
}

fn validate_schedule(schedule: &[DwellEntry]) -> Result<()> {
    for (i, e) in schedule.iter().enumerate() {
        if !(e.duration >= 0.0) || !e.duration.is_finite() {
            return Err(SolverError::InvalidSchedule(format!("dwell duration {} is not a finite non-negative number", e.duration)));
        }
        if schedule[..i].iter().any(|o| o.arrival == e.arrival) {
            return Err(SolverError::InvalidSchedule(format!("arrival {} listed twice", e.arrival)));
        }
    }
    Ok(())
}

/// The angle law `θ(t)` of a normal extremal on the whole real line.
#[derive(Debug, Clone)]
pub struct ThetaSolution {
    setup: Setup,
    label: CaseLabel,
    forward: Walk,
    backward: Walk,
}

impl ThetaSolution {
    /// Classifies the normalized covector and builds `θ(t)`, inserting the
    /// requested dwells for `t > 0`. Negative times follow the default law.
    pub fn new(phi: &CovectorInit, body: &ConvexBody, schedule: &[DwellEntry]) -> Result<Self> {
        validate_schedule(schedule)?;
        let s = Setup::new(phi, body)?;
        let forward = build_walk(&s, schedule, true)?;
        let backward = build_walk(&s, &[], false)?;
        let label = label_for(&s, &forward, &backward)?;
        Ok(Self { setup: s, label, forward, backward })
    }

    pub fn label(&self) -> &CaseLabel {
        &self.label
    }

    pub fn phi(&self) -> &CovectorInit {
        &self.setup.phi
    }

    pub fn body(&self) -> &ConvexBody {
        &self.setup.body
    }

    pub fn energy_bounds(&self) -> Option<EnergyBounds> {
        self.setup.bounds
    }

    pub fn theta0(&self) -> f64 {
        self.setup.phi.theta0()
    }

    /// `θ(t)` for any real `t`.
    pub fn theta(&self, t: f64) -> Result<f64> {
        if t >= 0.0 {
            self.forward.theta_at(&self.setup, t)
        } else {
            self.backward.theta_at(&self.setup, -t)
        }
    }

    /// Time at which the `t ≥ 0` law stops changing shape, if it becomes
    /// periodic (start of the repeating block and its period).
    pub fn periodicity(&self) -> Option<(f64, f64)> {
        self.forward.cycle.map(|c| (self.forward.pieces[c.first].t0(), c.dt))
    }
}

fn first_branch(w: &Walk) -> Option<&Branch> {
    w.pieces.iter().find_map(|p| match p {
        Piece::Branch { branch, .. } => Some(branch.as_ref()),
        _ => None,
    })
}

fn label_for(s: &Setup, fwd: &Walk, bwd: &Walk) -> Result<CaseLabel> {
    let theta0 = s.phi.theta0();
    let p3 = s.phi.phi3();
    let missing = || SolverError::Internal("missing first branch".into());
    Ok(match s.regime {
        Regime::StraightLine => CaseLabel::StraightLine,
        Regime::Periodic => CaseLabel::Periodic { period: 2.0 * s.body.polar_area() / p3.abs() },
        Regime::Monotone => CaseLabel::Monotone,
        Regime::MinEnergyLine => CaseLabel::MinEnergyLine,
        Regime::Oscillating => {
            let f = first_branch(fwd).ok_or_else(missing)?;
            if p3 == 0.0 {
                CaseLabel::Oscillating { theta1: theta0, theta2: f.theta_b, t1: 0.0, t2: f.duration }
            } else {
                let b = first_branch(bwd).ok_or_else(missing)?;
                CaseLabel::Oscillating { theta1: b.theta_b, theta2: f.theta_b, t1: -b.duration, t2: f.duration }
            }
        }
        Regime::Separatrix => {
            // Zeros and first-arrival times on each side, independent of any schedule.
            let side = |dir: f64| -> Result<(f64, Option<f64>, bool)> {
                let walk = if dir * p3 > 0.0 { fwd } else { bwd };
                let b = first_branch(walk).ok_or_else(missing)?;
                let conv = b.duration.is_finite();
                let sign = if dir * p3 > 0.0 { 1.0 } else { -1.0 };
                Ok((b.theta_b, conv.then_some(sign * b.duration), conv))
            };
            let (theta1, t1, convergent1) = side(-1.0)?;
            let (theta2, t2, convergent2) = side(1.0)?;
            CaseLabel::Separatrix { theta1, theta2, t1, t2, convergent1, convergent2 }
        }
        Regime::SeparatrixAtRest => {
            let arc = s.bounds().max_arc;
            let theta1 = arc_ahead(arc, theta0, -1.0, false).1;
            let theta2 = arc_ahead(arc, theta0, 1.0, false).1;
            let conv = |th: f64, side: f64| -> Result<bool> {
                Ok(matches!(s.side_kind(th, side)?, Some(EndKind::Simple { .. })))
            };
            CaseLabel::SeparatrixAtRest {
                theta1,
                theta2,
                convergent_below: conv(theta1, -1.0)?,
                convergent_above: conv(theta2, 1.0)?,
            }
        }
    })
}

/// `θ(t)` of a built solution.
pub fn theta_of_time(sol: &ThetaSolution, t: f64) -> Result<f64> {
    sol.theta(t)
}

/// Classifies an initial covector. With `abnormal` set the covector must have
/// `φ1 = φ2 = φ3 = 0`; otherwise it must satisfy `F_U(φ1, φ2) = 1`.
pub fn classify(phi: &CovectorInit, body: &ConvexBody, abnormal: bool) -> Result<CaseLabel> {
    if abnormal {
        if phi.phi1() != 0.0 || phi.phi2() != 0.0 || phi.phi3() != 0.0 {
            return Err(SolverError::InvalidAbnormal);
        }
        return Ok(CaseLabel::Abnormal { pattern: abnormal_pattern(phi.phi4(), phi.phi5())? });
    }
    Ok(ThetaSolution::new(phi, body, &[])?.label)
}

/// `t(θ) = ∫_{θ0}^{θ} r²/(s√rad)` with `s = sign φ3` (or `s = sign(θ − θ0)`
/// when `φ3 = 0`). Passing through isolated zeros with convergent integrals is
/// allowed; turning points and flat arcs are not.
pub fn time_of_theta(phi: &CovectorInit, body: &ConvexBody, theta: f64) -> Result<f64> {
    let s = Setup::new(phi, body)?;
    let theta0 = phi.theta0();
    if theta == theta0 {
        return Ok(0.0);
    }
    let dir = (theta - theta0).signum();
    let p3 = phi.phi3();
    let sign = if p3 != 0.0 { p3.signum() * dir } else { 1.0 };
    match s.regime {
        Regime::StraightLine | Regime::MinEnergyLine => {
            return Err(SolverError::ForbiddenRegion { theta });
        }
        Regime::Periodic | Regime::Monotone => {
            let b = Branch::new(&s, theta0, EndKind::Regular, theta, EndKind::Regular)?;
            return Ok(sign * b.duration);
        }
        _ => {}
    }
    let mut kind = if p3 != 0.0 {
        EndKind::Regular
    } else {
        match s.side_kind(theta0, dir)? {
            None => return Err(SolverError::ForbiddenRegion { theta }),
            Some(EndKind::Divergent) => return Err(SolverError::DivergentIntegral { theta: theta0 }),
            Some(k) => {
                if s.rad(theta0 + dir * 1e-9) < 0.0 {
                    return Err(SolverError::ForbiddenRegion { theta });
                }
                k
            }
        }
    };
    let mut cur = theta0;
    let mut total = 0.0;
    let mut at_zero = p3 == 0.0;
    loop {
        let z = s.next_zero(cur, dir, at_zero)?.expect("regime has zeros");
        if (theta - z) * dir < -ARC_TOL {
            let b = Branch::new(&s, cur, kind, theta, EndKind::Regular)?;
            return Ok(sign * (total + b.duration));
        }
        let arrive = s.arrival_kind(z, dir)?;
        if arrive == EndKind::Divergent {
            return Err(SolverError::DivergentIntegral { theta: z });
        }
        let b = Branch::new(&s, cur, kind, z, arrive)?;
        total += b.duration;
        if (theta - z).abs() <= ARC_TOL {
            return Ok(sign * total);
        }
        let passable = s.regime != Regime::Oscillating && s.bounds().max_arc.is_point();
        if !passable {
            return Err(SolverError::ForbiddenRegion { theta });
        }
        kind = match s.side_kind(z, dir)? {
            Some(k @ EndKind::Simple { .. }) => k,
            _ => return Err(SolverError::DivergentIntegral { theta: z }),
        };
        cur = z;
        at_zero = true;
    }
}

/// Vanishing order of the radicand at a zero, from a log-log fit of
/// `|rad(θᵢ ± δ)|` over `δ ∈ {1e-3, …, 1e-6}`. Sides on which the radicand
/// vanishes identically are ignored; if the two sides differ, `Higher` wins.
pub fn radicand_zero_order(phi: &CovectorInit, body: &ConvexBody, theta: f64) -> Result<ZeroOrder> {
    let s = Setup::new(phi, body)?;
    let value = hamiltonian::theta_rate_squared(phi, body, theta);
    if !(value.abs() <= ZERO_TOL) {
        return Err(SolverError::NotAZero { theta, value });
    }
    let lo = s.side_order(theta, -1.0)?;
    let hi = s.side_order(theta, 1.0)?;
    Ok(match (lo, hi) {
        (Some(ZeroOrder::Simple), Some(ZeroOrder::Simple) | None) | (None, Some(ZeroOrder::Simple)) => ZeroOrder::Simple,
        _ => ZeroOrder::Higher,
    })
}

/// Joint period `2 S₀/|φ3|` of the `φ4 = φ5 = 0` extremals.
pub fn period(phi: &CovectorInit, body: &ConvexBody) -> Result<f64> {
    if phi.has_vertical_casimirs() || phi.phi3() == 0.0 {
        return Err(SolverError::WrongCase { expected: "phi4 = phi5 = 0 and phi3 != 0", actual: format!("{:?}", phi.phi) });
    }
    let defect = phi.polar_defect(body);
    if !(defect <= POLAR_TOL) {
        return Err(SolverError::NotOnPolar { defect });
    }
    Ok(2.0 * body.polar_area() / phi.phi3().abs())
}

/// Value of the linear first integral `φ1x + φ2y + 2φ3z + 3φ4v + 3φ5w + ½φ4xz + ½φ5yz`,
/// equal to `t` along normalized normal extremals from the identity.
pub fn linear_integral(phi: &CovectorInit, g: GroupElement) -> f64 {
    let [p1, p2, p3, p4, p5] = phi.phi;
    let GroupElement { x, y, z, v, w } = g;
    p1 * x + p2 * y + 2.0 * p3 * z + 3.0 * p4 * v + 3.0 * p5 * w + HALF * p4 * x * z + HALF * p5 * y * z
}

/// Closed-form point at time `t` of a constant-angle segment that starts at
/// `start` at time `t0`.
pub fn constant_theta_segment(
    phi: &CovectorInit,
    start: GroupElement,
    t0: f64,
    t: f64,
    form: DwellForm,
) -> Result<GroupElement> {
    let [_, _, p3, p4, p5] = phi.phi;
    let e = phi.energy();
    match form {
        DwellForm::General if p5 == 0.0 => {
            return Err(SolverError::WrongCase { expected: "phi5 != 0", actual: format!("{:?}", phi.phi) })
        }
        DwellForm::Phi5Zero if p5 != 0.0 || p4 == 0.0 => {
            return Err(SolverError::WrongCase { expected: "phi5 = 0 and phi4 != 0", actual: format!("{:?}", phi.phi) })
        }
        _ => {}
    }
    if e == 0.0 {
        return Err(SolverError::ZeroEnergy);
    }
    let GroupElement { x: x0, y: y0, z: z0, v: v0, w: w0 } = start;
    let relation = match form {
        DwellForm::General => (y0 + (p3 + p4 * x0) / p5).abs(),
        DwellForm::Phi5Zero => (x0 + p3 / p4).abs(),
    };
    let integral = (linear_integral(phi, start) - t0).abs() / (1.0 + t0.abs());
    let defect = relation.max(integral);
    if defect > 1e-7 * (1.0 + start.to_array().iter().fold(0.0f64, |m, c| m.max(c.abs()))) {
        return Err(SolverError::InconsistentStartState { defect });
    }
    let s = t - t0;
    let e2 = e * e;
    Ok(match form {
        DwellForm::General => GroupElement::new(
            x0 + p5 / e * s,
            -p4 / e * s - (p3 + p4 * x0) / p5,
            z0 + p3 / (2.0 * e) * s,
            v0 - p3 * p5 / (12.0 * e2) * s * s + (p3 * x0 - 6.0 * p5 * z0) / (12.0 * e) * s,
            w0 + p3 * p4 / (12.0 * e2) * s * s
                + (6.0 * p4 * p5 * z0 - p3 * p4 * x0 - p3 * p3) / (12.0 * p5 * e) * s,
        ),
        DwellForm::Phi5Zero => GroupElement::new(
            -p3 / p4,
            y0 - p4 / e * s,
            z0 + p3 / (2.0 * e) * s,
            v0 - p3 * p3 / (12.0 * p4 * e) * s,
            w0 + p3 * p4 / (12.0 * e2) * s * s + (p3 * y0 + 6.0 * p4 * z0) / (12.0 * e) * s,
        ),
    })
}

/// Pattern of the abnormal extremal for `(φ4, φ5)`.
pub fn abnormal_pattern(phi4: f64, phi5: f64) -> Result<AbnormalPattern> {
    match (phi4 != 0.0, phi5 != 0.0) {
        (true, false) => Ok(AbnormalPattern::AlongY),
        (false, true) => Ok(AbnormalPattern::AlongX),
        (true, true) => Ok(AbnormalPattern::Oblique),
        (false, false) => Err(SolverError::Hamiltonian(HamiltonianError::ZeroVerticalCasimirs)),
    }
}

fn check_sign(s: f64) -> Result<()> {
    if s == 1.0 || s == -1.0 {
        Ok(())
    } else {
        Err(SolverError::InvalidSign(s))
    }
}

/// Constant control `u` with `F(u) = 1` of the abnormal extremal.
pub fn abnormal_control(phi4: f64, phi5: f64, s: f64, body: &ConvexBody) -> Result<[f64; 2]> {
    check_sign(s)?;
    let d = match abnormal_pattern(phi4, phi5)? {
        AbnormalPattern::AlongY => [0.0, s],
        AbnormalPattern::AlongX => [s, 0.0],
        AbnormalPattern::Oblique => [s * phi5, -s * phi4],
    };
    let f = body.gauge(d);
    Ok([d[0] / f, d[1] / f])
}

/// Point at time `t` of the abnormal extremal (a one-parameter subgroup).
pub fn abnormal_extremal(phi4: f64, phi5: f64, s: f64, body: &ConvexBody, t: f64) -> Result<GroupElement> {
    let u = abnormal_control(phi4, phi5, s, body)?;
    let g = GroupElement::new(u[0] * t, u[1] * t, 0.0, 0.0, 0.0);
    if abnormal_pattern(phi4, phi5)? == AbnormalPattern::Oblique {
        // y = −φ4 x/φ5 exactly.
        return Ok(GroupElement::new(g.x, -phi4 * g.x / phi5, 0.0, 0.0, 0.0));
    }
    Ok(g)
}

/// Covector for which an abnormal extremal is also normal with `M = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalCovector {
    /// `(0, sF(0,s))`, `(sF(s,0), 0)` and `s(F/(2φ5), −F/(2φ4))`, `F = F(sφ5, −sφ4)`.
    /// The oblique one maximizes the Hamiltonian only in special cases such as
    /// `|φ4| = |φ5|` for bodies symmetric in the diagonal.
    Explicit,
    /// The point of `∂U*` dual to the control: valid for every body.
    Dual,
}

pub fn abnormal_normal_covector(
    phi4: f64,
    phi5: f64,
    s: f64,
    body: &ConvexBody,
    kind: NormalCovector,
) -> Result<[f64; 5]> {
    let u = abnormal_control(phi4, phi5, s, body)?;
    let h = match kind {
        NormalCovector::Dual => body.polar_point(body.gauge_with_angle(u).1),
        NormalCovector::Explicit => match abnormal_pattern(phi4, phi5)? {
            AbnormalPattern::AlongY => [0.0, s * body.gauge([0.0, s])],
            AbnormalPattern::AlongX => [s * body.gauge([s, 0.0]), 0.0],
            AbnormalPattern::Oblique => {
                let f = body.gauge([s * phi5, -s * phi4]);
                [s * f / (2.0 * phi5), -s * f / (2.0 * phi4)]
            }
        },
    };
    Ok([h[0], h[1], 0.0, 0.0, 0.0])
}

/// Sampled extremal with controls, vertical coordinates and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub g: Vec<GroupElement>,
    pub u: Vec<[f64; 2]>,
    pub h: Vec<VerticalCoords>,
    pub theta: Vec<f64>,
    /// Doubled sector area swept by `(h1, h2)`; `σ̇ = h3`.
    pub sigma: Vec<f64>,
    /// Value `h1 u1 + h2 u2` of the maximized Hamiltonian.
    pub m: Vec<f64>,
    pub case: CaseLabel,
    /// `(h4, h5, E)`.
    pub casimirs: (f64, f64, f64),
    pub body: BodySpec,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// `max |L(g(t)) − t|/(1 + |t|)` over the nodes, for the covector `phi`.
    pub fn linear_integral_defect(&self, phi: &CovectorInit) -> f64 {
        self.t
            .iter()
            .zip(&self.g)
            .map(|(&t, &g)| (linear_integral(phi, g) - t).abs() / (1.0 + t.abs()))
            .fold(0.0, f64::max)
    }

    /// `max |F(u) − 1|` over the nodes.
    pub fn control_defect(&self, body: &ConvexBody) -> f64 {
        self.u.iter().map(|&u| (body.gauge(u) - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(SolverError::InvalidGrid("grid must start at t = 0".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(SolverError::InvalidGrid("grid must be finite and non-decreasing".into()));
    }
    Ok(())
}

/// `n` equally spaced nodes on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| if i + 1 == n { t_end } else { t_end * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Which coordinates are integrated along branches; the rest are algebraic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Recon {
    /// `φ4 = φ5 = 0`: `x, y, z` algebraic; integrate `(v, w)`.
    Planar,
    /// `|φ5| ≥ |φ4|`: integrate `(x, y, v)`; `z` from `h2`, `w` from the linear integral.
    ViaH2,
    /// `|φ4| > |φ5|`: integrate `(x, y, w)`; `z` from `h1`, `v` from the linear integral.
    ViaH1,
}

struct Rebuilder<'a> {
    s: &'a Setup,
    mode: Recon,
    opts: OdeOptions,
}

impl Rebuilder<'_> {
    /// Full group element from the integrated state `[t, a, b, c]` at angle `θ`
    /// and time `t`.
    fn assemble(&self, st: &[f64; 4], theta: f64, t: f64) -> GroupElement {
        let [p1, p2, p3, p4, p5] = self.s.phi.phi;
        let h = self.s.body.polar_point(theta);
        match self.mode {
            Recon::Planar => {
                let x = (h[1] - p2) / p3;
                let y = -(h[0] - p1) / p3;
                GroupElement::new(x, y, (t - p1 * x - p2 * y) / (2.0 * p3), st[1], st[2])
            }
            Recon::ViaH2 => {
                let (x, y, v) = (st[1], st[2], st[3]);
                let z = (p2 + (p3 + HALF * p4 * x + HALF * p5 * y) * x - h[1]) / p5;
                let w = (t - p1 * x - p2 * y - 2.0 * p3 * z - 3.0 * p4 * v - HALF * p4 * x * z - HALF * p5 * y * z)
                    / (3.0 * p5);
                GroupElement::new(x, y, z, v, w)
            }
            Recon::ViaH1 => {
                let (x, y, w) = (st[1], st[2], st[3]);
                let z = (p1 - (p3 + HALF * p4 * x + HALF * p5 * y) * y - h[0]) / p4;
                let v = (t - p1 * x - p2 * y - 2.0 * p3 * z - 3.0 * p5 * w - HALF * p4 * x * z - HALF * p5 * y * z)
                    / (3.0 * p4);
                GroupElement::new(x, y, z, v, w)
            }
        }
    }

    fn pack(&self, g: GroupElement, t: f64) -> [f64; 4] {
        match self.mode {
            Recon::Planar => [t, g.v, g.w, 0.0],
            Recon::ViaH2 => [t, g.x, g.y, g.v],
            Recon::ViaH1 => [t, g.x, g.y, g.w],
        }
    }

    /// `d[t, a, b, c]/dw` on a half-branch.
    fn rhs(&self, half: &Half, w: f64, st: &[f64; 4], side: f64) -> [f64; 4] {
        let s = self.s;
        let [p1, p2, p3, p4, p5] = s.phi.phi;
        let (theta, jac) = half.weight(s, w);
        let (r, dr) = s.body.polar_sided(theta, side);
        let u = control_from_polar(theta, r, dr);
        let dt = r * r * jac;
        let (x, y, z) = match self.mode {
            Recon::Planar => {
                let h = [r * theta.cos(), r * theta.sin()];
                let x = (h[1] - p2) / p3;
                let y = -(h[0] - p1) / p3;
                (x, y, (st[0] - p1 * x - p2 * y) / (2.0 * p3))
            }
            Recon::ViaH2 => {
                let (x, y) = (st[1], st[2]);
                (x, y, (p2 + (p3 + HALF * p4 * x + HALF * p5 * y) * x - r * theta.sin()) / p5)
            }
            Recon::ViaH1 => {
                let (x, y) = (st[1], st[2]);
                (x, y, (p1 - (p3 + HALF * p4 * x + HALF * p5 * y) * y - r * theta.cos()) / p4)
            }
        };
        let sixth = 2.0 * TWELFTH;
        let vdot = -HALF * (z + sixth * x * y) * u[0] + TWELFTH * x * x * u[1];
        let wdot = -TWELFTH * y * y * u[0] - HALF * (z - sixth * x * y) * u[1];
        match self.mode {
            Recon::Planar => [dt, dt * vdot, dt * wdot, 0.0],
            Recon::ViaH2 => [dt, dt * u[0], dt * u[1], dt * vdot],
            Recon::ViaH1 => [dt, dt * u[0], dt * u[1], dt * wdot],
        }
    }

    /// Integrates a half-branch from `w = 0` to `w_end`, reporting the state at
    /// the requested `w` values (sorted). Returns the end state.
    fn run_half(&self, half: &Half, start: [f64; 4], targets: &[f64], out: &mut Vec<[f64; 4]>) -> Result<[f64; 4]> {
        let mut nodes: Vec<f64> = half.breaks.clone();
        nodes.extend_from_slice(targets);
        nodes.push(0.0);
        nodes.push(half.w_end);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let mut st = start;
        let mut ti = 0;
        while ti < targets.len() && targets[ti] <= 0.0 {
            out.push(st);
            ti += 1;
        }
        // Polar arcs of the half, split at its corners. The one-sided control
        // is taken towards the middle of the enclosing arc, which stays clear
        // of rounding near a corner.
        let mut arcs = vec![0.0];
        arcs.extend_from_slice(&half.breaks);
        arcs.push(half.w_end);
        for win in nodes.windows(2) {
            let (a, b) = (win[0], win[1]);
            let k = arcs.partition_point(|&x| x <= a).clamp(1, arcs.len() - 1);
            let arc_mid = half.theta(0.5 * (arcs[k - 1] + arcs[k]));
            let f = |w: f64, y: &[f64; 4]| {
                let side = if arc_mid > half.theta(w) { 1.0 } else { -1.0 };
                self.rhs(half, w, y, side)
            };
            st = ode::integrate(&f, a, st, b, &self.opts)?;
            while ti < targets.len() && targets[ti] <= b {
                out.push(st);
                ti += 1;
            }
        }
        Ok(st)
    }
}

#[derive(Default)]
struct Samples {
    g: Vec<GroupElement>,
    theta: Vec<f64>,
    side: Vec<f64>,
    /// Node lies on a constant-angle segment with control `ℓ/E`.
    dwell: Vec<bool>,
}

/// Reconstructs the extremal on the time grid (which must start at 0 and be
/// non-decreasing). Controls on faces of a polygon at constant angle use the
/// edge midpoint; see [`reconstruct_with`].
pub fn reconstruct(sol: &ThetaSolution, grid: &[f64]) -> Result<Trajectory> {
    reconstruct_with(sol, grid, &|f: &ControlFace| f.midpoint())
}

/// As [`reconstruct`], with a selector choosing the constant control from the
/// exposed face when the angle is constant at a corner of `∂U*` and the
/// covector is `(φ1, φ2, 0, 0, 0)`.
pub fn reconstruct_with(
    sol: &ThetaSolution,
    grid: &[f64],
    selector: &dyn Fn(&ControlFace) -> [f64; 2],
) -> Result<Trajectory> {
    check_grid(grid)?;
    let s = &sol.setup;
    let phi = &s.phi;
    let theta0 = phi.theta0();
    let mut smp = Samples::default();

    if s.regime == Regime::StraightLine {
        let face = s.body.argmax_control([phi.phi1(), phi.phi2()])?;
        let u = selector(&face);
        for &t in grid {
            smp.g.push(GroupElement::new(u[0] * t, u[1] * t, 0.0, 0.0, 0.0));
            smp.theta.push(theta0);
            smp.side.push(1.0);
        }
        return Ok(finish(sol, grid, smp, Some(u)));
    }

    let mode = if !phi.has_vertical_casimirs() {
        Recon::Planar
    } else if phi.phi5().abs() >= phi.phi4().abs() {
        Recon::ViaH2
    } else {
        Recon::ViaH1
    };
    let rb = Rebuilder { s, mode, opts: OdeOptions::with_tol(1e-12) };
    let t_end = *grid.last().unwrap_or(&0.0);
    let mut g = GroupElement::IDENTITY;
    let mut next = 0usize;
    sol.forward.visit(t_end, |piece, dt, dth| {
        let (t0, t1) = (piece.t0() + dt, piece.t1() + dt);
        let begin = next;
        while next < grid.len() && (grid[next] < t1 || (t1.is_infinite() && grid[next] >= t0)) {
            next += 1;
        }
        // Nodes exactly at the end of the walk belong to the last piece, and
        // nodes at either end of a dwell to the dwell.
        let dwell = matches!(piece, Piece::Dwell { .. });
        let reach = if dwell { t1 + 1e-12 * (1.0 + t1.abs()) } else { t1 };
        while (dwell || t1 >= t_end) && next < grid.len() && grid[next] <= reach {
            next += 1;
        }
        let times = &grid[begin..next];
        match piece {
            Piece::Dwell { theta, .. } => {
                let u = s.dwell_control();
                for &t in times {
                    let d = t - t0;
                    smp.g.push(group_mul(g, GroupElement::new(u[0] * d, u[1] * d, 0.0, 0.0, 0.0)));
                    smp.theta.push(theta + dth);
                    smp.side.push(1.0);
                    smp.dwell.push(true);
                }
                if t1.is_finite() {
                    let d = t1 - t0;
                    g = group_mul(g, GroupElement::new(u[0] * d, u[1] * d, 0.0, 0.0, 0.0));
                }
            }
            Piece::Branch { branch, .. } => {
                let mut state = rb.pack(g, t0);
                for (hi, half) in branch.halves.iter().enumerate() {
                    let h_t0 = t0 + branch.half_start(hi);
                    let h_t1 = h_t0 + half.duration();
                    let in_half: Vec<f64> = times
                        .iter()
                        .copied()
                        .filter(|&t| t >= h_t0 && (t < h_t1 || (hi == 1 && t <= h_t1)))
                        .collect();
                    let in_half: Vec<f64> = if hi == 0 {
                        in_half
                    } else {
                        in_half.into_iter().filter(|&t| t >= h_t0).collect()
                    };
                    let mut ws = Vec::with_capacity(in_half.len());
                    for &t in &in_half {
                        ws.push(half.locate(s, t - h_t0)?);
                    }
                    let mut states = Vec::with_capacity(ws.len());
                    state = rb.run_half(half, state, &ws, &mut states)?;
                    for ((&t, &w), st) in in_half.iter().zip(&ws).zip(&states) {
                        let th = half.theta(w);
                        smp.g.push(rb.assemble(st, th, t));
                        smp.theta.push(th + dth);
                        let at_end = !half.leading && w >= half.w_end;
                        smp.side.push(if at_end { -branch.dir } else { branch.dir });
                        smp.dwell.push(false);
                    }
                    if hi == 1 {
                        g = rb.assemble(&state, half.theta(half.w_end), t0 + branch.finite_end());
                    }
                }
                // Frozen tail of a divergent end: constant control from the
                // truncation point.
                if branch.duration.is_infinite() {
                    let te = t0 + branch.finite_end();
                    let u = s.dwell_control();
                    for &t in times.iter().filter(|&&t| t > te) {
                        let d = t - te;
                        smp.g.push(group_mul(g, GroupElement::new(u[0] * d, u[1] * d, 0.0, 0.0, 0.0)));
                        smp.theta.push(branch.theta_b + dth);
                        smp.side.push(-branch.dir);
                        smp.dwell.push(true);
                    }
                }
            }
        }
        Ok(())
    })?;
    if smp.g.len() != grid.len() {
        return Err(SolverError::Internal(format!("sampled {} of {} nodes", smp.g.len(), grid.len())));
    }
    Ok(finish(sol, grid, smp, None))
}

fn finish(sol: &ThetaSolution, grid: &[f64], smp: Samples, fixed_u: Option<[f64; 2]>) -> Trajectory {
    let s = &sol.setup;
    let theta0 = s.phi.theta0();
    let dwell_u = matches!(s.regime, Regime::MinEnergyLine | Regime::Separatrix | Regime::SeparatrixAtRest)
        .then(|| s.dwell_control());
    let mut tr = Trajectory {
        t: grid.to_vec(),
        g: smp.g,
        u: Vec::with_capacity(grid.len()),
        h: Vec::with_capacity(grid.len()),
        theta: smp.theta,
        sigma: Vec::with_capacity(grid.len()),
        m: Vec::with_capacity(grid.len()),
        case: sol.label.clone(),
        casimirs: hamiltonian::casimirs(&s.phi),
        body: s.body.to_spec(),
    };
    for i in 0..grid.len() {
        let th = tr.theta[i];
        let h = h_from_state(&s.phi, tr.g[i]);
        let u = match fixed_u {
            Some(u) => u,
            None => {
                let (r, dr) = s.body.polar_sided(th, smp.side[i]);
                // On a zero of the radicand inside a dwell the control is ℓ/E.
                match dwell_u {
                    Some(du) if smp.dwell[i] || (h.h3.abs() <= 1e-12 && s.rad(th).abs() <= 1e-12) => du,
                    _ => control_from_polar(th, r, dr),
                }
            }
        };
        tr.m.push(h.h1 * u[0] + h.h2 * u[1]);
        tr.u.push(u);
        tr.h.push(h);
        tr.sigma.push(if th == theta0 { 0.0 } else { s.body.sector_integral(theta0, th) });
    }
    tr
}

/// Sampled abnormal extremal. Vertical coordinates, `θ` and `M` refer to the
/// chosen normal covector.
pub fn abnormal_trajectory(
    phi4: f64,
    phi5: f64,
    s: f64,
    body: &ConvexBody,
    grid: &[f64],
    covector: NormalCovector,
) -> Result<Trajectory> {
    check_grid(grid)?;
    let u = abnormal_control(phi4, phi5, s, body)?;
    let psi = abnormal_normal_covector(phi4, phi5, s, body, covector)?;
    let normal = CovectorInit::new(psi)?;
    let pattern = abnormal_pattern(phi4, phi5)?;
    let mut tr = Trajectory {
        t: grid.to_vec(),
        g: Vec::new(),
        u: Vec::new(),
        h: Vec::new(),
        theta: Vec::new(),
        sigma: Vec::new(),
        m: Vec::new(),
        case: CaseLabel::Abnormal { pattern },
        casimirs: (phi4, phi5, 0.0),
        body: body.to_spec(),
    };
    for &t in grid {
        let g = abnormal_extremal(phi4, phi5, s, body, t)?;
        let h = h_from_state(&normal, g);
        tr.g.push(g);
        tr.u.push(u);
        tr.m.push(h.h1 * u[0] + h.h2 * u[1]);
        tr.h.push(h);
        tr.theta.push(h.h2.atan2(h.h1));
        tr.sigma.push(0.0);
    }
    Ok(tr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn phi(p: [f64; 5]) -> CovectorInit {
        CovectorInit::new(p).unwrap()
    }

    fn disc() -> ConvexBody {
        ConvexBody::disc(1.0).unwrap()
    }

    #[test]
    fn classification_examples() {
        let d = disc();
        assert_eq!(classify(&phi([1.0, 0.0, 1.0, 0.0, 0.0]), &d, false).unwrap(), CaseLabel::Periodic { period: 2.0 * PI });
        assert_eq!(classify(&phi([1.0, 0.0, 0.0, 0.0, 0.0]), &d, false).unwrap(), CaseLabel::StraightLine);
        assert_eq!(classify(&phi([1.0, 0.0, 1.0, 0.0, 1.0]), &d, false).unwrap(), CaseLabel::Monotone);
        match classify(&phi([1.0, 0.0, 0.0, 0.0, 1.0]), &d, false).unwrap() {
            CaseLabel::SeparatrixAtRest { convergent_below, convergent_above, .. } => {
                assert!(!convergent_below && !convergent_above)
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            classify(&phi([2.0, 0.0, 0.0, 0.0, 1.0]), &d, false),
            Err(SolverError::NotOnPolar { .. })
        ));
        assert!(matches!(classify(&phi([1.0, 0.0, 0.0, 0.0, 1.0]), &d, true), Err(SolverError::InvalidAbnormal)));
    }

    #[test]
    fn periodic_time_is_linear() {
        let d = disc();
        let f = phi([1.0, 0.0, 1.0, 0.0, 0.0]);
        for th in [0.5, 2.0, -1.0, 7.0] {
            assert!((time_of_theta(&f, &d, th).unwrap() - th).abs() < 1e-12);
        }
        let sol = ThetaSolution::new(&f, &d, &[]).unwrap();
        for t in [0.3, 4.0, 13.0, -2.0] {
            assert!((sol.theta(t).unwrap() - t).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn circle_reconstruction() {
        let d = disc();
        let f = phi([1.0, 0.0, 1.0, 0.0, 0.0]);
        let sol = ThetaSolution::new(&f, &d, &[]).unwrap();
        let grid = uniform_grid(2.0 * PI, 41);
        let tr = reconstruct(&sol, &grid).unwrap();
        for (t, g) in tr.t.iter().zip(&tr.g) {
            assert!((g.x - t.sin()).abs() < 1e-10);
            assert!((g.y - (1.0 - t.cos())).abs() < 1e-10);
            assert!((g.z - 0.5 * (t - t.sin())).abs() < 1e-10);
        }
        assert!((tr.g.last().unwrap().z - PI).abs() < 1e-10);
    }

    #[test]
    fn constant_theta_forms_match_group_flow() {
        let f = phi([0.0, 1.0, 1.0, -0.5, 1.0]);
        let e = f.energy();
        let u = [f.phi5() / e, -f.phi4() / e];
        let x0 = 0.3;
        let start0 = GroupElement::new(x0, -(1.0 + -0.5 * x0) / 1.0, 0.2, 0.0, 0.0);
        // Fix w0 from the linear integral at t0.
        let t0 = 0.7;
        let mut start = start0;
        start.w = (t0 - linear_integral(&f, GroupElement { w: 0.0, ..start0 })) / (3.0 * f.phi5());
        let got = constant_theta_segment(&f, start, t0, t0 + 1.3, DwellForm::General).unwrap();
        let want = group_mul(start, GroupElement::new(u[0] * 1.3, u[1] * 1.3, 0.0, 0.0, 0.0));
        assert!(got.max_abs_diff(&want) < 1e-13, "{got:?} {want:?}");

        let f = phi([0.0, -1.0, 0.5, 2.0, 0.0]);
        let e = f.energy();
        let start0 = GroupElement::new(-0.25, 0.4, 0.1, 0.3, 0.0);
        let mut start = start0;
        start.v = (t0 - linear_integral(&f, GroupElement { v: 0.0, ..start0 })) / (3.0 * f.phi4());
        let got = constant_theta_segment(&f, start, t0, t0 + 0.9, DwellForm::Phi5Zero).unwrap();
        let want = group_mul(start, GroupElement::new(0.0, -2.0 / e * 0.9, 0.0, 0.0, 0.0));
        assert!(got.max_abs_diff(&want) < 1e-13, "{got:?} {want:?}");
    }

    #[test]
    fn constant_theta_checks() {
        let f = phi([1.0, 0.0, 0.0, 0.0, 1.0]);
        let g = constant_theta_segment(&f, GroupElement::IDENTITY, 0.0, 2.0, DwellForm::General).unwrap();
        assert!((g.x - 2.0).abs() < 1e-15 && g.z == 0.0);
        assert!(matches!(
            constant_theta_segment(&f, GroupElement::new(0.0, 1.0, 0.0, 0.0, 0.0), 0.0, 1.0, DwellForm::General),
            Err(SolverError::InconsistentStartState { .. })
        ));
        let f0 = phi([1.0, 1.0, 0.0, 1.0, 1.0]);
        assert_eq!(
            constant_theta_segment(&f0, GroupElement::IDENTITY, 0.0, 1.0, DwellForm::General),
            Err(SolverError::ZeroEnergy)
        );
    }

    #[test]
    fn abnormal_examples() {
        let d = disc();
        let g = abnormal_extremal(1.0, 0.0, 1.0, &d, 2.0).unwrap();
        assert_eq!(g, GroupElement::new(0.0, 2.0, 0.0, 0.0, 0.0));
        let g = abnormal_extremal(0.0, 1.0, 1.0, &d, 3.0).unwrap();
        assert_eq!(g, GroupElement::new(3.0, 0.0, 0.0, 0.0, 0.0));
        let g = abnormal_extremal(1.0, 1.0, 1.0, &d, 2f64.sqrt()).unwrap();
        assert!(g.max_abs_diff(&GroupElement::new(1.0, -1.0, 0.0, 0.0, 0.0)) < 1e-15);
        assert!(matches!(abnormal_extremal(0.0, 0.0, 1.0, &d, 1.0), Err(SolverError::Hamiltonian(_))));
    }

    #[test]
    fn zero_orders() {
        let d = disc();
        assert_eq!(radicand_zero_order(&phi([1.0, 0.0, 0.0, 0.0, 1.0]), &d, 0.0).unwrap(), ZeroOrder::Higher);
        let sq = ConvexBody::unit_square();
        assert_eq!(radicand_zero_order(&phi([0.0, 1.0, 1.0, -0.5, 1.0]), &sq, 0.0).unwrap(), ZeroOrder::Simple);
        assert!(matches!(
            radicand_zero_order(&phi([1.0, 0.0, 0.0, 0.0, 1.0]), &d, 1.0),
            Err(SolverError::NotAZero { .. })
        ));
    }

    #[test]
    fn arc_lookahead() {
        let a = AngleArc::point(0.0);
        assert_eq!(arc_ahead(a, 1.0, 1.0, false).0, TAU);
        assert_eq!(arc_ahead(a, 1.0, -1.0, false).0, 0.0);
        assert_eq!(arc_ahead(a, 0.0, 1.0, true).0, TAU);
        assert_eq!(arc_ahead(a, 0.0, -1.0, true).0, -TAU);
        let b = AngleArc::new(0.0, 1.0);
        assert_eq!(arc_ahead(b, 1.0, 1.0, true), (TAU, TAU + 1.0));
        assert_eq!(arc_ahead(b, 1.0, -1.0, false), (1.0, 0.0));
    }
}
