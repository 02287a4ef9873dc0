//! Control bodies `U` in the horizontal plane and their polar curves.
//!
//! For a convex body with the origin in its interior, the support function
//! `p(θ) = F_U(cos θ, sin θ)` determines everything used downstream: the polar
//! radius `r = 1/p` of `∂U*`, its one-sided derivatives, the quasinorm of `U`
//! (the support function of `U*`) and the maximizing controls. Bodies need not
//! be symmetric.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::quad::{self, QuadOptions};
use crate::numeric::roots::golden_max;

/// Angular tolerance for deciding that a direction is an edge normal.
pub const EDGE_NORMAL_TOL: f64 = 1e-12;

/// Default resolution used when sampling a support function.
pub const DEFAULT_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ConvexError {
    #[error("invalid body: {0}")]
    InvalidBody(String),
    #[error("direction must be non-zero")]
    ZeroDirection,
    #[error("phi3 must be non-zero for an isoperimetrix")]
    ZeroPhi3,
}

/// JSON form of a body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BodySpec {
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 2],
        /// Rotation of the `a` axis from the `u1` axis, radians.
        #[serde(default, skip_serializing_if = "is_zero")]
        angle: f64,
    },
    Disc {
        radius: f64,
    },
    Sampled {
        support: Vec<[f64; 2]>,
    },
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest absolute difference between two angles modulo `2π`.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}

fn unit(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

fn perp(theta: f64) -> [f64; 2] {
    [-theta.sin(), theta.cos()]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Value and one-sided derivatives of the polar radius at an angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarSample {
    pub r: f64,
    pub dr_minus: f64,
    pub dr_plus: f64,
}

impl PolarSample {
    pub fn is_corner(&self) -> bool {
        self.dr_minus != self.dr_plus
    }

    /// One-sided derivative seen when moving in direction `sign`.
    pub fn dr_towards(&self, sign: f64) -> f64 {
        if sign < 0.0 {
            self.dr_minus
        } else {
            self.dr_plus
        }
    }
}

/// Exposed face of `U` in a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ControlFace {
    Point([f64; 2]),
    /// Edge listed counterclockwise.
    Edge([f64; 2], [f64; 2]),
}

impl ControlFace {
    pub fn midpoint(&self) -> [f64; 2] {
        match *self {
            ControlFace::Point(p) => p,
            ControlFace::Edge(a, b) => [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])],
        }
    }

    /// Point at parameter `s ∈ [0, 1]` along the face.
    pub fn lerp(&self, s: f64) -> [f64; 2] {
        match *self {
            ControlFace::Point(p) => p,
            ControlFace::Edge(a, b) => [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])],
        }
    }

    pub fn endpoints(&self) -> ([f64; 2], [f64; 2]) {
        match *self {
            ControlFace::Point(p) => (p, p),
            ControlFace::Edge(a, b) => (a, b),
        }
    }
}

/// Closed arc `[start, end]` of polar angles, `start ∈ [0, 2π)`, `end - start ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleArc {
    pub start: f64,
    pub end: f64,
}

impl AngleArc {
    pub fn point(theta: f64) -> Self {
        let t = wrap_angle(theta);
        Self { start: t, end: t }
    }

    pub fn new(start: f64, end: f64) -> Self {
        let s = wrap_angle(start);
        let len = wrap_angle(end - start);
        Self { start: s, end: s + len }
    }

    pub fn is_point(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, theta: f64, tol: f64) -> bool {
        let d = wrap_angle(theta - self.start);
        d <= self.end - self.start + tol || TAU - d <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Polygon {
    vertices: Vec<[f64; 2]>,
    /// Outward unit normal of edge `k` (from vertex `k` to `k + 1`).
    normals: Vec<[f64; 2]>,
    offsets: Vec<f64>,
    normal_angles: Vec<f64>,
}

impl Polygon {
    fn new(vertices: Vec<[f64; 2]>) -> Result<Self, ConvexError> {
        let n = vertices.len();
        if n < 3 {
            return Err(ConvexError::InvalidBody("polygon needs at least 3 vertices".into()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(ConvexError::InvalidBody("non-finite vertex".into()));
        }
        let mut normals = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n);
        let mut normal_angles = Vec::with_capacity(n);
        let mut turning = 0.0;
        for k in 0..n {
            let a = vertices[k];
            let b = vertices[(k + 1) % n];
            let c = vertices[(k + 2) % n];
            let e = [b[0] - a[0], b[1] - a[1]];
            let f = [c[0] - b[0], c[1] - b[1]];
            let len = e[0].hypot(e[1]);
            if len == 0.0 {
                return Err(ConvexError::InvalidBody(format!("repeated vertex {k}")));
            }
            if cross(e, f) <= 0.0 {
                return Err(ConvexError::InvalidBody(
                    "vertices must be in strictly convex counterclockwise order".into(),
                ));
            }
            turning += cross(e, f).atan2(dot(e, f));
            let nrm = [e[1] / len, -e[0] / len];
            let d = dot(nrm, a);
            if !(d > 0.0) {
                return Err(ConvexError::InvalidBody("origin must be strictly interior".into()));
            }
            normals.push(nrm);
            offsets.push(d);
            normal_angles.push(wrap_angle(nrm[1].atan2(nrm[0])));
        }
        if (turning - TAU).abs() > 1e-9 {
            return Err(ConvexError::InvalidBody("polygon is not simple".into()));
        }
        Ok(Self { vertices, normals, offsets, normal_angles })
    }

    fn n(&self) -> usize {
        self.vertices.len()
    }

    fn vertex(&self, k: usize) -> [f64; 2] {
        self.vertices[k % self.n()]
    }

    fn best_vertex(&self, h: [f64; 2]) -> usize {
        (0..self.n())
            .max_by(|&i, &j| dot(h, self.vertices[i]).total_cmp(&dot(h, self.vertices[j])))
            .expect("non-empty polygon")
    }

    fn corner_at(&self, theta: f64) -> Option<usize> {
        self.normal_angles.iter().position(|&a| angle_distance(a, theta) <= EDGE_NORMAL_TOL)
    }

    /// Gauge and the index of the facet achieving it.
    fn gauge_facet(&self, u: [f64; 2]) -> (f64, usize) {
        (0..self.n())
            .map(|k| (dot(self.normals[k], u) / self.offsets[k], k))
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .expect("non-empty polygon")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Ellipse {
    a: f64,
    b: f64,
    center: [f64; 2],
    angle: f64,
}

impl Ellipse {
    fn to_local(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * p[0] + s * p[1], -s * p[0] + c * p[1]]
    }

    fn to_global(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [c * p[0] - s * p[1], s * p[0] + c * p[1]]
    }

    fn local_center(&self) -> [f64; 2] {
        self.to_local(self.center)
    }
}

/// Support function tabulated on an increasing periodic angle grid and
/// interpolated with a shape-preserving (Fritsch–Butland) cubic.
#[derive(Debug, Clone, PartialEq)]
struct Sampled {
    theta: Vec<f64>,
    value: Vec<f64>,
    slope: Vec<f64>,
}

impl Sampled {
    fn new(table: &[[f64; 2]]) -> Result<Self, ConvexError> {
        if table.len() < 8 {
            return Err(ConvexError::InvalidBody("sampled support needs at least 8 points".into()));
        }
        let theta: Vec<f64> = table.iter().map(|p| p[0]).collect();
        let value: Vec<f64> = table.iter().map(|p| p[1]).collect();
        if theta.iter().chain(&value).any(|v| !v.is_finite()) {
            return Err(ConvexError::InvalidBody("non-finite support sample".into()));
        }
        if theta[0] < 0.0 || *theta.last().unwrap() >= TAU || theta.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConvexError::InvalidBody("support angles must increase strictly within [0, 2π)".into()));
        }
        if value.iter().any(|&v| v <= 0.0) {
            return Err(ConvexError::InvalidBody("support values must be positive (origin interior)".into()));
        }
        let n = theta.len();
        let step = |i: usize| -> f64 {
            if i + 1 < n {
                theta[i + 1] - theta[i]
            } else {
                theta[0] + TAU - theta[n - 1]
            }
        };
        let secant: Vec<f64> = (0..n).map(|i| (value[(i + 1) % n] - value[i]) / step(i)).collect();
        let slope = (0..n)
            .map(|i| {
                let im = (i + n - 1) % n;
                let (d0, d1) = (secant[im], secant[i]);
                if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    let (h0, h1) = (step(im), step(i));
                    let (w0, w1) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                    (w0 + w1) / (w0 / d0 + w1 / d1)
                }
            })
            .collect();
        Ok(Self { theta, value, slope })
    }

    fn from_fn(p: impl Fn(f64) -> f64, n: usize) -> Result<Self, ConvexError> {
        let table: Vec<[f64; 2]> = (0..n).map(|i| {
            let t = TAU * i as f64 / n as f64;
            [t, p(t)]
        }).collect();
        Self::new(&table)
    }

    /// Support value and derivative at `theta`.
    fn eval(&self, theta: f64) -> (f64, f64) {
        let n = self.theta.len();
        let t = wrap_angle(theta);
        let (i, t0, t1) = match self.theta.partition_point(|&x| x <= t) {
            0 => (n - 1, self.theta[n - 1] - TAU, self.theta[0]),
            k if k == n => (n - 1, self.theta[n - 1], self.theta[0] + TAU),
            k => (k - 1, self.theta[k - 1], self.theta[k]),
        };
        let j = (i + 1) % n;
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p0, p1, m0, m1) = (self.value[i], self.value[j], self.slope[i], self.slope[j]);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * p0
            + (s3 - 2.0 * s2 + s) * h * m0
            + (-2.0 * s3 + 3.0 * s2) * p1
            + (s3 - s2) * h * m1;
        let dv = ((6.0 * s2 - 6.0 * s) * p0 + (-6.0 * s2 + 6.0 * s) * p1) / h
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (3.0 * s2 - 2.0 * s) * m1;
        (v, dv)
    }

    fn rotated(&self, angle: f64) -> Self {
        let mut pairs: Vec<(f64, f64, f64)> = (0..self.theta.len())
            .map(|i| (wrap_angle(self.theta[i] + angle), self.value[i], self.slope[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            theta: pairs.iter().map(|p| p.0).collect(),
            value: pairs.iter().map(|p| p.1).collect(),
            slope: pairs.iter().map(|p| p.2).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Polygon(Polygon),
    Ellipse(Ellipse),
    Disc { radius: f64 },
    Sampled(Sampled),
}

/// A validated convex control body with the origin strictly inside.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    shape: Shape,
}

impl ConvexBody {
    pub fn from_spec(spec: &BodySpec) -> Result<Self, ConvexError> {
        let shape = match spec {
            BodySpec::Polygon { vertices } => Shape::Polygon(Polygon::new(vertices.clone())?),
            &BodySpec::Ellipse { a, b, center, angle } => {
                if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
                    return Err(ConvexError::InvalidBody("ellipse semi-axes must be positive".into()));
                }
                if !center.iter().all(|c| c.is_finite()) || !angle.is_finite() {
                    return Err(ConvexError::InvalidBody("non-finite ellipse data".into()));
                }
                let e = Ellipse { a, b, center, angle };
                let c = e.local_center();
                if (c[0] / a).powi(2) + (c[1] / b).powi(2) >= 1.0 {
                    return Err(ConvexError::InvalidBody("origin must be strictly interior".into()));
                }
                Shape::Ellipse(e)
            }
            &BodySpec::Disc { radius } => {
                if !(radius > 0.0) || !radius.is_finite() {
                    return Err(ConvexError::InvalidBody("disc radius must be positive".into()));
                }
                Shape::Disc { radius }
            }
            BodySpec::Sampled { support } => Shape::Sampled(Sampled::new(support)?),
        };
        Ok(Self { shape })
    }

    pub fn to_spec(&self) -> BodySpec {
        match &self.shape {
            Shape::Polygon(p) => BodySpec::Polygon { vertices: p.vertices.clone() },
            Shape::Ellipse(e) => BodySpec::Ellipse { a: e.a, b: e.b, center: e.center, angle: e.angle },
            Shape::Disc { radius } => BodySpec::Disc { radius: *radius },
            Shape::Sampled(s) => BodySpec::Sampled {
                support: s.theta.iter().zip(&s.value).map(|(&t, &v)| [t, v]).collect(),
            },
        }
    }

    pub fn disc(radius: f64) -> Result<Self, ConvexError> {
        Self::from_spec(&BodySpec::Disc { radius })
    }

    pub fn ellipse(a: f64, b: f64, center: [f64; 2]) -> Result<Self, ConvexError> {
        Self::from_spec(&BodySpec::Ellipse { a, b, center, angle: 0.0 })
    }

    pub fn polygon(vertices: Vec<[f64; 2]>) -> Result<Self, ConvexError> {
        Self::from_spec(&BodySpec::Polygon { vertices })
    }

    /// Square with vertices `(±1, ±1)`.
    pub fn unit_square() -> Self {
        Self::polygon(vec![[1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]]).expect("valid square")
    }

    /// Tabulates a support function on a uniform grid of `n` angles.
    pub fn sampled_from_support(p: impl Fn(f64) -> f64, n: usize) -> Result<Self, ConvexError> {
        Ok(Self { shape: Shape::Sampled(Sampled::from_fn(p, n)?) })
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Polygon(_) => "polygon",
            Shape::Ellipse(_) => "ellipse",
            Shape::Disc { .. } => "disc",
            Shape::Sampled(_) => "sampled",
        }
    }

    pub fn is_polygon(&self) -> bool {
        matches!(self.shape, Shape::Polygon(_))
    }

    /// Vertices of a polygonal body, counterclockwise.
    pub fn vertices(&self) -> Option<&[[f64; 2]]> {
        match &self.shape {
            Shape::Polygon(p) => Some(&p.vertices),
            _ => None,
        }
    }

    /// The body rotated counterclockwise by `angle`; its polar curve is rotated
    /// by the same angle.
    pub fn rotated(&self, angle: f64) -> Self {
        let rot = |p: [f64; 2]| {
            let (s, c) = angle.sin_cos();
            [c * p[0] - s * p[1], s * p[0] + c * p[1]]
        };
        let shape = match &self.shape {
            Shape::Polygon(p) => Shape::Polygon(Polygon::new(p.vertices.iter().map(|&v| rot(v)).collect()).expect("rotation preserves validity")),
            Shape::Ellipse(e) => Shape::Ellipse(Ellipse { center: rot(e.center), angle: e.angle + angle, ..e.clone() }),
            Shape::Disc { radius } => Shape::Disc { radius: *radius },
            Shape::Sampled(s) => Shape::Sampled(s.rotated(angle)),
        };
        Self { shape }
    }

    /// Support function `F_U(h) = max_{u ∈ U} h·u`.
    pub fn support(&self, h: [f64; 2]) -> f64 {
        match &self.shape {
            Shape::Polygon(p) => p.vertices.iter().map(|&v| dot(h, v)).fold(f64::NEG_INFINITY, f64::max),
            Shape::Ellipse(e) => {
                let hl = e.to_local(h);
                dot(h, e.center) + (e.a * hl[0]).hypot(e.b * hl[1])
            }
            Shape::Disc { radius } => radius * h[0].hypot(h[1]),
            Shape::Sampled(s) => {
                let len = h[0].hypot(h[1]);
                if len == 0.0 {
                    0.0
                } else {
                    len * s.eval(h[1].atan2(h[0])).0
                }
            }
        }
    }

    /// Support function in the unit direction `θ` and its derivative in `θ`.
    fn support_angle(&self, theta: f64) -> (f64, f64) {
        match &self.shape {
            Shape::Polygon(p) => {
                let e = unit(theta);
                let k = p.best_vertex(e);
                (dot(e, p.vertices[k]), dot(perp(theta), p.vertices[k]))
            }
            Shape::Ellipse(e) => {
                let (s, c) = (theta - e.angle).sin_cos();
                let root = (e.a * c).hypot(e.b * s);
                (
                    dot(unit(theta), e.center) + root,
                    dot(perp(theta), e.center) + (e.b * e.b - e.a * e.a) * s * c / root,
                )
            }
            Shape::Disc { radius } => (*radius, 0.0),
            Shape::Sampled(s) => s.eval(theta),
        }
    }

    /// Minkowski gauge (quasinorm) `F(u) = inf{λ > 0 : u/λ ∈ U}`.
    pub fn gauge(&self, u: [f64; 2]) -> f64 {
        self.gauge_with_angle(u).0
    }

    /// Gauge together with the polar angle `θ` at which `u·h(θ)` is maximal over
    /// `∂U*` (the outer normal of `U` at `u/F(u)`).
    pub fn gauge_with_angle(&self, u: [f64; 2]) -> (f64, f64) {
        if u == [0.0, 0.0] {
            return (0.0, 0.0);
        }
        match &self.shape {
            Shape::Polygon(p) => {
                let (g, k) = p.gauge_facet(u);
                (g, p.normal_angles[k])
            }
            Shape::Ellipse(e) => {
                let ul = e.to_local(u);
                let c = e.local_center();
                let (a2, b2) = (e.a * e.a, e.b * e.b);
                let qa = ul[0] * ul[0] / a2 + ul[1] * ul[1] / b2;
                let qb = ul[0] * c[0] / a2 + ul[1] * c[1] / b2;
                let qc = c[0] * c[0] / a2 + c[1] * c[1] / b2 - 1.0;
                let g = qa / (qb + (qb * qb - qa * qc).sqrt());
                let bnd = [ul[0] / g - c[0], ul[1] / g - c[1]];
                let nrm = e.to_global([bnd[0] / a2, bnd[1] / b2]);
                (g, wrap_angle(nrm[1].atan2(nrm[0])))
            }
            Shape::Disc { radius } => (u[0].hypot(u[1]) / radius, wrap_angle(u[1].atan2(u[0]))),
            Shape::Sampled(s) => {
                let f = |t: f64| dot(u, unit(t)) / s.eval(t).0;
                let n = s.theta.len();
                let best = (0..n).max_by(|&i, &j| f(s.theta[i]).total_cmp(&f(s.theta[j]))).unwrap();
                let lo = if best == 0 { s.theta[n - 1] - TAU } else { s.theta[best - 1] };
                let hi = if best + 1 == n { s.theta[0] + TAU } else { s.theta[best + 1] };
                let (t, v) = golden_max(f, lo, hi, 1e-13);
                (v, wrap_angle(t))
            }
        }
    }

    /// Polar radius of `∂U*` with one-sided derivatives.
    pub fn polar(&self, theta: f64) -> PolarSample {
        if let Shape::Polygon(p) = &self.shape {
            if let Some(k) = p.corner_at(theta) {
                // Edge k separates vertex k (active below the normal angle) from k + 1.
                let e = unit(theta);
                let pe = dot(e, p.vertex(k)).max(dot(e, p.vertex(k + 1)));
                let r = 1.0 / pe;
                let dm = -dot(perp(theta), p.vertex(k)) * r * r;
                let dp = -dot(perp(theta), p.vertex(k + 1)) * r * r;
                return PolarSample { r, dr_minus: dm, dr_plus: dp };
            }
        }
        let (pv, dp) = self.support_angle(theta);
        let r = 1.0 / pv;
        let dr = -dp * r * r;
        PolarSample { r, dr_minus: dr, dr_plus: dr }
    }

    pub fn polar_radius(&self, theta: f64) -> f64 {
        1.0 / self.support_angle(theta).0
    }

    /// Point `h(θ) = r(θ)(cos θ, sin θ)` of `∂U*`.
    pub fn polar_point(&self, theta: f64) -> [f64; 2] {
        let r = self.polar_radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    /// Angles in `[0, 2π)` where the polar radius has a corner (sorted).
    pub fn corner_angles(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Polygon(p) => {
                let mut a = p.normal_angles.clone();
                a.sort_by(f64::total_cmp);
                a
            }
            _ => Vec::new(),
        }
    }

    /// Corner angles (unwrapped) lying strictly inside `(lo, hi)`.
    pub fn corners_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut out = Vec::new();
        for c in self.corner_angles() {
            let mut k = ((lo - c) / TAU).floor();
            loop {
                let t = c + k * TAU;
                if t >= hi {
                    break;
                }
                if t > lo {
                    out.push(t);
                }
                k += 1.0;
            }
        }
        out.sort_by(f64::total_cmp);
        out
    }

    /// Area `S₀ = ½∮ r²(θ) dθ` of the polar body `U*`.
    pub fn polar_area(&self) -> f64 {
        match &self.shape {
            Shape::Disc { radius } => PI / (radius * radius),
            Shape::Polygon(p) => {
                let pts: Vec<[f64; 2]> = (0..p.n())
                    .map(|k| [p.normals[k][0] / p.offsets[k], p.normals[k][1] / p.offsets[k]])
                    .collect();
                0.5 * (0..pts.len()).map(|k| cross(pts[k], pts[(k + 1) % pts.len()])).sum::<f64>()
            }
            Shape::Ellipse(e) => {
                // U* = {h : h·c + |D h| ≤ 1} is the ellipse hᵀMh + 2c·h ≤ 1 with
                // M = D² − c cᵀ (local frame).
                let c = e.local_center();
                let (m11, m22, m12) = (e.a * e.a - c[0] * c[0], e.b * e.b - c[1] * c[1], -c[0] * c[1]);
                let det = m11 * m22 - m12 * m12;
                let cmc = (m22 * c[0] * c[0] - 2.0 * m12 * c[0] * c[1] + m11 * c[1] * c[1]) / det;
                PI * (1.0 + cmc) / det.sqrt()
            }
            Shape::Sampled(s) => {
                let opts = QuadOptions::tol(1e-14, 1e-12);
                let mut breaks = s.theta.clone();
                breaks.push(TAU);
                0.5 * quad::integrate_with_breaks(|t| self.polar_radius(t).powi(2), 0.0, TAU, &breaks, opts)
                    .expect("smooth positive integrand")
            }
        }
    }

    /// The exposed face `argmax_{u ∈ U} h·u`.
    pub fn argmax_control(&self, h: [f64; 2]) -> Result<ControlFace, ConvexError> {
        if h[0] == 0.0 && h[1] == 0.0 {
            return Err(ConvexError::ZeroDirection);
        }
        Ok(match &self.shape {
            Shape::Polygon(p) => {
                let theta = h[1].atan2(h[0]);
                match p.corner_at(theta) {
                    Some(k) => ControlFace::Edge(p.vertex(k), p.vertex(k + 1)),
                    None => ControlFace::Point(p.vertices[p.best_vertex(h)]),
                }
            }
            Shape::Ellipse(e) => {
                let hl = e.to_local(h);
                let len = (e.a * hl[0]).hypot(e.b * hl[1]);
                let pl = [e.a * e.a * hl[0] / len, e.b * e.b * hl[1] / len];
                let pg = e.to_global(pl);
                ControlFace::Point([e.center[0] + pg[0], e.center[1] + pg[1]])
            }
            Shape::Disc { radius } => {
                let len = h[0].hypot(h[1]);
                ControlFace::Point([radius * h[0] / len, radius * h[1] / len])
            }
            Shape::Sampled(s) => {
                let theta = h[1].atan2(h[0]);
                let (pv, dp) = s.eval(theta);
                let (e, q) = (unit(theta), perp(theta));
                ControlFace::Point([pv * e[0] + dp * q[0], pv * e[1] + dp * q[1]])
            }
        })
    }

    /// Arc of polar angles on which `ℓ·h(θ)` attains its maximum `F(ℓ)` over
    /// `∂U*`. For the minimum use `extreme_arc(-ℓ)`.
    pub fn extreme_arc(&self, ell: [f64; 2]) -> AngleArc {
        if let Shape::Polygon(p) = &self.shape {
            // ℓ pointing at a vertex of U: the maximizer over U* is a whole edge.
            let dir = ell[1].atan2(ell[0]);
            for k in 0..p.n() {
                let v = p.vertices[k];
                if angle_distance(v[1].atan2(v[0]), dir) <= EDGE_NORMAL_TOL {
                    let before = p.normal_angles[(k + p.n() - 1) % p.n()];
                    return AngleArc::new(before, p.normal_angles[k]);
                }
            }
        }
        AngleArc::point(self.gauge_with_angle(ell).1)
    }

    /// The point `u* = ℓ/F(ℓ)` of `∂U` with outer normal in the maximizing arc
    /// of [`Self::extreme_arc`]; snapped to the exact vertex when that arc is
    /// non-degenerate.
    pub fn extreme_point(&self, ell: [f64; 2]) -> [f64; 2] {
        if let Shape::Polygon(p) = &self.shape {
            let arc = self.extreme_arc(ell);
            if !arc.is_point() {
                return p.vertices[p.best_vertex(unit(0.5 * (arc.start + arc.end)))];
            }
        }
        let g = self.gauge(ell);
        [ell[0] / g, ell[1] / g]
    }

    /// Support gap `F_U(e_θ) − u*·e_θ ≥ 0` for a boundary point `u*`, evaluated
    /// without cancellation near the directions normal to `U` at `u*`.
    pub fn support_gap(&self, theta: f64, u_star: [f64; 2]) -> f64 {
        let e = unit(theta);
        match &self.shape {
            Shape::Disc { radius } => {
                let half = 0.5 * (theta - u_star[1].atan2(u_star[0]));
                2.0 * radius * half.sin().powi(2)
            }
            Shape::Ellipse(el) => {
                // With a(θ) = D Rᵀ e_θ the gap is |a(θ)|(1 − cos ψ), ψ = ∠(a(θ), a*).
                let el_loc = el.to_local(e);
                let a_t = [el.a * el_loc[0], el.b * el_loc[1]];
                let d = el.to_local([u_star[0] - el.center[0], u_star[1] - el.center[1]]);
                let a_s = [d[0] / el.a, d[1] / el.b];
                let psi = cross(a_s, a_t).atan2(dot(a_s, a_t));
                2.0 * a_t[0].hypot(a_t[1]) * (0.5 * psi).sin().powi(2)
            }
            Shape::Polygon(p) => p
                .vertices
                .iter()
                .map(|v| dot([v[0] - u_star[0], v[1] - u_star[1]], e))
                .fold(f64::NEG_INFINITY, f64::max)
                .max(0.0),
            Shape::Sampled(s) => (s.eval(theta).0 - dot(u_star, e)).max(0.0),
        }
    }

    /// [`Self::support_gap`] at `θ* + ψ` with the offset kept separate, where
    /// `θ*` is the outer normal direction at `u*`. Smooth in `ψ` down to
    /// `ψ → 0`; `None` for shapes without such a form.
    pub fn support_gap_near(&self, theta_star: f64, psi: f64, u_star: [f64; 2]) -> Option<f64> {
        match &self.shape {
            Shape::Disc { radius } => {
                let base = wrap_angle(theta_star - u_star[1].atan2(u_star[0]) + PI) - PI;
                Some(2.0 * radius * (0.5 * (base + psi)).sin().powi(2))
            }
            Shape::Ellipse(el) => {
                let (s, c) = theta_star.sin_cos();
                let le = el.to_local([c, s]);
                let lp = el.to_local([-s, c]);
                let a_e = [el.a * le[0], el.b * le[1]];
                let a_p = [el.a * lp[0], el.b * lp[1]];
                let d = el.to_local([u_star[0] - el.center[0], u_star[1] - el.center[1]]);
                let a_s = [d[0] / el.a, d[1] / el.b];
                let (sp, cp) = psi.sin_cos();
                let a_t = [cp * a_e[0] + sp * a_p[0], cp * a_e[1] + sp * a_p[1]];
                let cr = cp * cross(a_s, a_e) + sp * cross(a_s, a_p);
                let ang = cr.atan2(dot(a_s, a_t));
                Some(2.0 * a_t[0].hypot(a_t[1]) * (0.5 * ang).sin().powi(2))
            }
            _ => None,
        }
    }

    /// Polar radius and its derivative; within the corner tolerance the
    /// derivative is the one-sided limit towards `side`.
    pub fn polar_sided(&self, theta: f64, side: f64) -> (f64, f64) {
        let p = self.polar(theta);
        if !p.is_corner() {
            return (p.r, p.dr_plus);
        }
        (p.r, p.dr_towards(side))
    }

    /// `∫_{θa}^{θb} r²(ξ) dξ` on the universal cover (twice the swept sector
    /// area of `∂U*`).
    pub fn sector_integral(&self, theta_a: f64, theta_b: f64) -> f64 {
        if theta_b < theta_a {
            return -self.sector_integral(theta_b, theta_a);
        }
        let turns = ((theta_b - theta_a) / TAU).floor();
        let rest_a = theta_a + turns * TAU;
        let full = if turns > 0.0 { 2.0 * turns * self.polar_area() } else { 0.0 };
        let breaks = self.corners_between(rest_a, theta_b);
        let opts = QuadOptions::tol(1e-15, 1e-13);
        full + quad::integrate_with_breaks(|t| self.polar_radius(t).powi(2), rest_a, theta_b, &breaks, opts)
            .expect("smooth positive integrand")
    }

    /// Isoperimetrix through the origin for initial covector `(φ1, φ2, φ3)`.
    pub fn isoperimetrix(&self, phi1: f64, phi2: f64, phi3: f64) -> Result<Isoperimetrix<'_>, ConvexError> {
        if phi3 == 0.0 {
            return Err(ConvexError::ZeroPhi3);
        }
        Ok(Isoperimetrix { body: self, phi1, phi2, phi3 })
    }

    /// Points of `∂U` sampled by outer-normal angle (face midpoints at edges).
    pub fn boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        if let Shape::Polygon(p) = &self.shape {
            let mut v = p.vertices.clone();
            v.push(p.vertices[0]);
            return v;
        }
        (0..=n)
            .map(|i| {
                let t = TAU * i as f64 / n as f64;
                self.argmax_control(unit(t)).expect("unit direction").midpoint()
            })
            .collect()
    }

    /// Points of `∂U*` sampled by polar angle (polygon: exact vertices).
    pub fn polar_boundary_points(&self, n: usize) -> Vec<[f64; 2]> {
        if let Shape::Polygon(p) = &self.shape {
            let mut v: Vec<[f64; 2]> = (0..p.n())
                .map(|k| [p.normals[k][0] / p.offsets[k], p.normals[k][1] / p.offsets[k]])
                .collect();
            v.push(v[0]);
            return v;
        }
        (0..=n).map(|i| self.polar_point(TAU * i as f64 / n as f64)).collect()
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (ap[0] - s * ab[0]).hypot(ap[1] - s * ab[1])
}

/// Control-from-polar formula: the unique maximizer for direction `θ` expressed
/// through `r(θ)` and a (one-sided) derivative `r'(θ)`.
pub fn control_from_polar(theta: f64, r: f64, dr: f64) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [(dr * s + r * c) / (r * r), (r * s - dr * c) / (r * r)]
}

/// `∂U*` rotated by `∓π/2` (sign of `φ3`), scaled by `1/|φ3|` and shifted by
/// `(−φ2/φ3, φ1/φ3)`; parametrized by the polar angle of `∂U*`.
#[derive(Debug, Clone, Copy)]
pub struct Isoperimetrix<'a> {
    body: &'a ConvexBody,
    phi1: f64,
    phi2: f64,
    phi3: f64,
}

impl Isoperimetrix<'_> {
    pub fn point(&self, theta: f64) -> [f64; 2] {
        let h = self.body.polar_point(theta);
        [(h[1] - self.phi2) / self.phi3, -(h[0] - self.phi1) / self.phi3]
    }

    pub fn sample(&self, n: usize) -> Vec<[f64; 2]> {
        (0..=n).map(|i| self.point(TAU * i as f64 / n as f64)).collect()
    }

    /// Euclidean distance from `p` to the curve: exact for polygons, by dense
    /// sampling and golden-section refinement otherwise.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        if let Shape::Polygon(_) = &self.body.shape {
            let v: Vec<[f64; 2]> = self
                .body
                .polar_boundary_points(0)
                .into_iter()
                .map(|h| [(h[1] - self.phi2) / self.phi3, -(h[0] - self.phi1) / self.phi3])
                .collect();
            return v.windows(2).map(|w| segment_distance(p, w[0], w[1])).fold(f64::INFINITY, f64::min);
        }
        let d = |t: f64| {
            let q = self.point(t);
            -(q[0] - p[0]).hypot(q[1] - p[1])
        };
        let n = 720;
        let best = (0..n).map(|i| TAU * i as f64 / n as f64).max_by(|a, b| d(*a).total_cmp(&d(*b))).unwrap();
        let step = TAU / n as f64;
        -golden_max(d, best - step, best + step, 1e-12).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn square_gauge_and_support() {
        let sq = ConvexBody::unit_square();
        assert_eq!(sq.gauge([2.0, 0.0]), 2.0);
        assert_eq!(sq.gauge([0.0, 0.0]), 0.0);
        assert_eq!(sq.support([1.0, 1.0]), 2.0);
        assert_eq!(sq.support([0.0, 0.0]), 0.0);
    }

    #[test]
    fn disc_support_is_euclidean() {
        let d = ConvexBody::disc(1.0).unwrap();
        assert!(close(d.support([3.0, 4.0]), 5.0, 1e-15));
        let p = d.polar(0.7);
        assert_eq!((p.r, p.dr_minus, p.dr_plus), (1.0, 0.0, 0.0));
    }

    #[test]
    fn square_polar_corner() {
        let sq = ConvexBody::unit_square();
        let p = sq.polar(0.0);
        assert!(close(p.r, 1.0, 1e-15));
        assert!(close(p.dr_minus, 1.0, 1e-15) && close(p.dr_plus, -1.0, 1e-15), "{p:?}");
        assert!(close(sq.polar_radius(PI / 4.0), 1.0 / 2f64.sqrt(), 1e-15));
        assert_eq!(sq.corner_angles().len(), 4);
    }

    #[test]
    fn polar_areas() {
        assert!(close(ConvexBody::disc(1.0).unwrap().polar_area(), PI, 1e-14));
        assert!(close(ConvexBody::unit_square().polar_area(), 2.0, 1e-14));
        assert!(close(ConvexBody::ellipse(2.0, 1.0, [0.0, 0.0]).unwrap().polar_area(), PI / 2.0, 1e-14));
    }

    #[test]
    fn offset_ellipse_area_matches_quadrature() {
        let e = ConvexBody::from_spec(&BodySpec::Ellipse { a: 2.0, b: 1.0, center: [0.4, -0.3], angle: 0.6 }).unwrap();
        let q = 0.5 * quad::integrate(|t| e.polar_radius(t).powi(2), 0.0, TAU, QuadOptions::tol(1e-15, 1e-14)).unwrap();
        assert!(close(e.polar_area(), q, 1e-11 * q), "{} vs {}", e.polar_area(), q);
    }

    #[test]
    fn argmax_faces() {
        let d = ConvexBody::disc(1.0).unwrap();
        assert_eq!(d.argmax_control([1.0, 0.0]).unwrap(), ControlFace::Point([1.0, 0.0]));
        let sq = ConvexBody::unit_square();
        assert_eq!(sq.argmax_control([1.0, 0.0]).unwrap(), ControlFace::Edge([1.0, -1.0], [1.0, 1.0]));
        assert_eq!(sq.argmax_control([1.0, 1.0]).unwrap(), ControlFace::Point([1.0, 1.0]));
        assert_eq!(sq.argmax_control([0.0, 0.0]), Err(ConvexError::ZeroDirection));
    }

    #[test]
    fn invalid_bodies() {
        assert!(ConvexBody::polygon(vec![[1.0, 0.0], [0.0, 1.0]]).is_err());
        // clockwise
        assert!(ConvexBody::polygon(vec![[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0], [-1.0, 1.0]]).is_err());
        // origin outside
        assert!(ConvexBody::polygon(vec![[1.0, 1.0], [2.0, 1.0], [2.0, 2.0]]).is_err());
        assert!(ConvexBody::ellipse(1.0, 1.0, [1.0, 0.0]).is_err());
        assert!(ConvexBody::disc(0.0).is_err());
        assert!(ConvexBody::disc(f64::NAN).is_err());
    }

    #[test]
    fn isoperimetrix_disc() {
        let d = ConvexBody::disc(1.0).unwrap();
        let iso = d.isoperimetrix(1.0, 0.0, 1.0).unwrap();
        for p in iso.sample(64) {
            assert!(close(p[0].hypot(p[1] - 1.0), 1.0, 1e-14));
        }
        let iso = d.isoperimetrix(1.0, 0.0, -1.0).unwrap();
        for p in iso.sample(64) {
            assert!(close(p[0].hypot(p[1] + 1.0), 1.0, 1e-14));
        }
        assert!(matches!(d.isoperimetrix(1.0, 0.0, 0.0), Err(ConvexError::ZeroPhi3)));
    }

    #[test]
    fn isoperimetrix_square_passes_origin() {
        let sq = ConvexBody::unit_square();
        let iso = sq.isoperimetrix(1.0, 0.0, 1.0).unwrap();
        assert!(iso.point(0.0)[0].abs() < 1e-15 && iso.point(0.0)[1].abs() < 1e-15);
        // Rotated l1 ball |x| + |y - 1| = 1.
        for p in iso.sample(97) {
            assert!(close(p[0].abs() + (p[1] - 1.0).abs(), 1.0, 1e-14), "{p:?}");
        }
    }

    #[test]
    fn sampled_disc_matches_disc() {
        let s = ConvexBody::sampled_from_support(|_| 1.0, 64).unwrap();
        assert!(close(s.polar_area(), PI, 1e-12));
        assert!(close(s.gauge([0.3, -0.4]), 0.5, 1e-12));
    }

    #[test]
    fn extreme_arcs() {
        let sq = ConvexBody::unit_square();
        // l = (1, 0.5) is maximized over the l1 ball only at the vertex (1, 0).
        let a = sq.extreme_arc([1.0, 0.5]);
        assert!(a.is_point() && angle_distance(a.start, 0.0) < 1e-15);
        // l = (1, 1) points at the vertex (1, 1) of U: a whole edge of U* is maximal.
        let a = sq.extreme_arc([1.0, 1.0]);
        assert!(close(a.start, 0.0, 1e-15) && close(a.end, PI / 2.0, 1e-15), "{a:?}");
        let d = ConvexBody::disc(2.0).unwrap();
        assert!(close(d.extreme_arc([0.0, -3.0]).start, 1.5 * PI, 1e-15));
    }
}
