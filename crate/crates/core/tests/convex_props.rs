mod common;

use std::f64::consts::TAU;

use cartan_core::convex::{control_from_polar, ConvexBody, ControlFace};
use cartan_core::numeric::roots::golden_max;
use common::{any_body, polygon, smooth_body};
use proptest::prelude::*;

/// `max_{h ∈ U*} h·u`, by dense sampling of `∂U*` and golden-section refinement
/// (exact at polygon vertices of `U*`).
fn polar_max(body: &ConvexBody, u: [f64; 2]) -> f64 {
    let f = |t: f64| {
        let h = body.polar_point(t);
        h[0] * u[0] + h[1] * u[1]
    };
    let pts = body.polar_boundary_points(720);
    let sampled = pts.iter().map(|h| h[0] * u[0] + h[1] * u[1]).fold(f64::NEG_INFINITY, f64::max);
    let step = TAU / 2880.0;
    let best = (0..2880).map(|i| i as f64 * step).max_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    let (_, refined) = golden_max(f, best - step, best + step, 1e-12);
    sampled.max(refined)
}

fn nonzero_vector() -> impl Strategy<Value = [f64; 2]> {
    (0.0..TAU, 0.1..3.0f64).prop_map(|(a, r)| [r * a.cos(), r * a.sin()])
}

fn near_corner(body: &ConvexBody, theta: f64) -> bool {
    body.corner_angles().iter().any(|c| {
        let d = (theta - c).rem_euclid(TAU);
        d.min(TAU - d) < 1e-7
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn bipolar(body in any_body(), u in nonzero_vector()) {
        let g = body.gauge(u);
        prop_assert!((g - polar_max(&body, u)).abs() <= 1e-10 * g.max(1.0));
    }

    #[test]
    fn gauge_is_homogeneous(body in any_body(), u in nonzero_vector(), k in 0.1..10.0f64) {
        let g = body.gauge(u);
        prop_assert!((body.gauge([k * u[0], k * u[1]]) - k * g).abs() <= 1e-12 * k * g);
    }

    #[test]
    fn duality_pairing(body in any_body(), theta in 0.0..TAU) {
        let e = [theta.cos(), theta.sin()];
        let face = body.argmax_control(e).unwrap();
        let (a, b) = face.endpoints();
        let f = body.support(e);
        for u in [a, b] {
            prop_assert!((e[0] * u[0] + e[1] * u[1] - f).abs() <= 1e-12 * f.max(1.0));
        }
    }

    #[test]
    fn maximizers_lie_on_the_boundary(body in any_body(), h in nonzero_vector()) {
        let (a, b) = body.argmax_control(h).unwrap().endpoints();
        prop_assert!((body.gauge(a) - 1.0).abs() <= 1e-12);
        prop_assert!((body.gauge(b) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn control_from_polar_smooth(body in smooth_body(), theta in 0.0..TAU) {
        let p = body.polar(theta);
        let u = control_from_polar(theta, p.r, p.dr_plus);
        let face = body.argmax_control(body.polar_point(theta)).unwrap();
        let ControlFace::Point(v) = face else { panic!("smooth body returned an edge") };
        prop_assert!((u[0] - v[0]).abs().max((u[1] - v[1]).abs()) <= 1e-10);
    }

    #[test]
    fn control_from_polar_on_arcs(body in polygon(), theta in 0.0..TAU) {
        prop_assume!(!near_corner(&body, theta));
        let p = body.polar(theta);
        prop_assert!(!p.is_corner());
        let u = control_from_polar(theta, p.r, p.dr_plus);
        let ControlFace::Point(v) = body.argmax_control(body.polar_point(theta)).unwrap() else {
            panic!("arc interior mapped to an edge")
        };
        prop_assert!((u[0] - v[0]).abs().max((u[1] - v[1]).abs()) <= 1e-10);
    }

    #[test]
    fn corners_give_edge_endpoints(body in polygon()) {
        for c in body.corner_angles() {
            let p = body.polar(c);
            prop_assert!(p.is_corner());
            let lo = control_from_polar(c, p.r, p.dr_minus);
            let hi = control_from_polar(c, p.r, p.dr_plus);
            let face = body.argmax_control([c.cos(), c.sin()]).unwrap();
            let ControlFace::Edge(a, b) = face else { panic!("corner {c} mapped to a point") };
            let d = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).abs().max((x[1] - y[1]).abs());
            prop_assert!(d(lo, a).max(d(hi, b)) <= 1e-10 || d(lo, b).max(d(hi, a)) <= 1e-10,
                "corner {}: {:?} {:?} vs {:?} {:?}", c, lo, hi, a, b);
        }
    }

    #[test]
    fn polar_radius_inverts_support(body in any_body(), theta in 0.0..TAU) {
        let r = body.polar_radius(theta);
        prop_assert!((r * body.support([theta.cos(), theta.sin()]) - 1.0).abs() <= 1e-13);
    }
}
