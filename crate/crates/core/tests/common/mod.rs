//! Strategies shared by the property tests.
#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use cartan_core::convex::{BodySpec, ConvexBody};
use cartan_core::hamiltonian::CovectorInit;
use proptest::prelude::*;

pub fn disc() -> impl Strategy<Value = ConvexBody> {
    (0.5..2.0f64).prop_map(|r| ConvexBody::disc(r).unwrap())
}

/// Ellipses with the origin well inside.
pub fn ellipse() -> impl Strategy<Value = ConvexBody> {
    (0.5..2.0f64, 0.5..2.0f64, 0.0..0.4f64, 0.0..TAU, 0.0..PI).prop_map(|(a, b, k, dir, angle)| {
        let c = k * a.min(b);
        let spec = BodySpec::Ellipse { a, b, center: [c * dir.cos(), c * dir.sin()], angle };
        ConvexBody::from_spec(&spec).unwrap()
    })
}

/// Convex polygons inscribed in a circle of radius `R` (random vertex
/// angles), shifted off-centre so they are not symmetric.
pub fn polygon() -> impl Strategy<Value = ConvexBody> {
    (prop::collection::vec(0.3..1.0f64, 3..8), 0.0..TAU, 0.5..2.0f64, 0.0..0.4f64, 0.0..TAU)
        .prop_filter_map("gap at least pi", |(gaps, phase, r, k, dir)| {
            let total: f64 = gaps.iter().sum();
            let gaps: Vec<f64> = gaps.iter().map(|g| g * TAU / total).collect();
            let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
            if max_gap >= 0.9 * PI {
                return None;
            }
            let c = k * r * (0.5 * max_gap).cos();
            let mut a = phase;
            let vertices = gaps
                .iter()
                .map(|g| {
                    let v = [r * a.cos() + c * dir.cos(), r * a.sin() + c * dir.sin()];
                    a += g;
                    v
                })
                .collect();
            ConvexBody::polygon(vertices).ok()
        })
}

pub fn smooth_body() -> impl Strategy<Value = ConvexBody> {
    prop_oneof![disc(), ellipse()]
}

pub fn any_body() -> impl Strategy<Value = ConvexBody> {
    prop_oneof![disc(), ellipse(), polygon()]
}

/// Normal covector with `(φ1, φ2) = h(θ0)` on the polar curve.
pub fn covector(body: &ConvexBody, theta0: f64, p3: f64, p4: f64, p5: f64) -> CovectorInit {
    let h = body.polar_point(theta0);
    CovectorInit::new([h[0], h[1], p3, p4, p5]).unwrap()
}

/// Body and a normal covector on it.
pub fn problem(body: impl Strategy<Value = ConvexBody>) -> impl Strategy<Value = (ConvexBody, CovectorInit)> {
    (body, 0.0..TAU, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_map(|(b, t, p3, p4, p5)| {
            let phi = covector(&b, t, p3, p4, p5);
            (b, phi)
        })
}
