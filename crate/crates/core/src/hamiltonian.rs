//! Vertical coordinates, the closed-form adjoint solution, Casimir functions and
//! the right-hand side of the angle dynamics.
//!
//! A covector `ψ` on the group is paired with the left-invariant frame to give the
//! vertical coordinates `h_i = ψ(X_i)`. Along extremals `h4 = φ4`, `h5 = φ5` and
//! `E = h3²/2 + h1 h5 − h2 h4` are constant, while `(h1, h2)` moves on the polar
//! curve `∂U*`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{left_invariant_frame, GroupElement, HALF, TWELFTH};
use crate::convex::{AngleArc, ConvexBody};

/// Tolerance of the normalization check `F_U(φ1, φ2) = 1`.
pub const POLAR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum HamiltonianError {
    #[error("initial covector must be non-zero and finite")]
    ZeroCovector,
    #[error("phi4 and phi5 both vanish")]
    ZeroVerticalCasimirs,
}

/// Initial adjoint data `φ = ψ(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovectorInit {
    pub phi: [f64; 5],
}

impl CovectorInit {
    pub fn new(phi: [f64; 5]) -> Result<Self, HamiltonianError> {
        if phi.iter().any(|c| !c.is_finite()) || phi.iter().all(|&c| c == 0.0) {
            return Err(HamiltonianError::ZeroCovector);
        }
        Ok(Self { phi })
    }

    pub fn phi1(&self) -> f64 {
        self.phi[0]
    }
    pub fn phi2(&self) -> f64 {
        self.phi[1]
    }
    pub fn phi3(&self) -> f64 {
        self.phi[2]
    }
    pub fn phi4(&self) -> f64 {
        self.phi[3]
    }
    pub fn phi5(&self) -> f64 {
        self.phi[4]
    }

    /// Polar angle of `(φ1, φ2)`.
    pub fn theta0(&self) -> f64 {
        self.phi[1].atan2(self.phi[0])
    }

    /// Casimir `E = φ3²/2 + φ1 φ5 − φ2 φ4`.
    pub fn energy(&self) -> f64 {
        let [p1, p2, p3, p4, p5] = self.phi;
        HALF * p3 * p3 + p1 * p5 - p2 * p4
    }

    /// The functional `ℓ = (φ5, −φ4)` whose values `ℓ·h` on `∂U*` bound `E`.
    pub fn ell(&self) -> [f64; 2] {
        [self.phi[4], -self.phi[3]]
    }

    pub fn has_vertical_casimirs(&self) -> bool {
        self.phi[3] != 0.0 || self.phi[4] != 0.0
    }

    /// Deviation `|F_U(φ1, φ2) − 1|` from the normalization `M = 1`.
    pub fn polar_defect(&self, body: &ConvexBody) -> f64 {
        (body.support([self.phi[0], self.phi[1]]) - 1.0).abs()
    }
}

/// Values `h_i = ψ(X_i)` of a covector on the left-invariant frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VerticalCoords {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
    pub h4: f64,
    pub h5: f64,
}

impl VerticalCoords {
    pub fn to_array(self) -> [f64; 5] {
        [self.h1, self.h2, self.h3, self.h4, self.h5]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self { h1: a[0], h2: a[1], h3: a[2], h4: a[3], h5: a[4] }
    }

    /// Rate of the doubled swept sector area of `(h1, h2)`.
    pub fn sigma_dot(&self) -> f64 {
        self.h3
    }

    pub fn energy(&self) -> f64 {
        HALF * self.h3 * self.h3 + self.h1 * self.h5 - self.h2 * self.h4
    }
}

/// Closed-form vertical coordinates at the point `g` of an extremal started with
/// covector `φ`. Independent of `v` and `w`.
pub fn h_from_state(phi: &CovectorInit, g: GroupElement) -> VerticalCoords {
    let [p1, p2, p3, p4, p5] = phi.phi;
    let GroupElement { x, y, z, .. } = g;
    let c = p3 + HALF * p4 * x + HALF * p5 * y;
    VerticalCoords {
        h1: p1 - c * y - p4 * z,
        h2: p2 + c * x - p5 * z,
        h3: p3 + p4 * x + p5 * y,
        h4: p4,
        h5: p5,
    }
}

/// Closed-form adjoint `ψ(t)` as a function of the state.
pub fn psi_closed_form(phi: &CovectorInit, g: GroupElement) -> [f64; 5] {
    let [p1, p2, p3, p4, p5] = phi.phi;
    let GroupElement { x, y, z, .. } = g;
    let sixth = 2.0 * TWELFTH;
    [
        p1 - HALF * p3 * y - sixth * p5 * y * y - sixth * p4 * x * y - HALF * p4 * z,
        p2 + HALF * p3 * x + sixth * p4 * x * x + sixth * p5 * x * y - HALF * p5 * z,
        p3 + HALF * p4 * x + HALF * p5 * y,
        p4,
        p5,
    ]
}

/// Pairs a covector with the left-invariant frame at `g`.
pub fn pair_with_frame(psi: [f64; 5], g: GroupElement) -> VerticalCoords {
    let frame = left_invariant_frame(g);
    VerticalCoords::from_array(std::array::from_fn(|i| (0..5).map(|j| psi[j] * frame[i][j]).sum()))
}

/// Casimir functions `(h4, h5, E)`.
pub fn casimirs(phi: &CovectorInit) -> (f64, f64, f64) {
    (phi.phi4(), phi.phi5(), phi.energy())
}

/// Signed radicand `φ3² + 2φ4(h2 − φ2) − 2φ5(h1 − φ1)` at `h = h(θ) ∈ ∂U*`.
pub fn radicand(phi: &CovectorInit, body: &ConvexBody, theta: f64) -> f64 {
    let [p1, p2, p3, p4, p5] = phi.phi;
    let h = body.polar_point(theta);
    p3 * p3 + 2.0 * p4 * (h[1] - p2) - 2.0 * p5 * (h[0] - p1)
}

/// One-sided derivative of [`radicand`] in `θ` on the side `side` (±1).
pub fn radicand_slope(phi: &CovectorInit, body: &ConvexBody, theta: f64, side: f64) -> f64 {
    let p = body.polar(theta);
    let dr = p.dr_towards(side);
    let (s, c) = theta.sin_cos();
    let dh = [dr * c - p.r * s, dr * s + p.r * c];
    2.0 * phi.phi4() * dh[1] - 2.0 * phi.phi5() * dh[0]
}

/// `θ̇²` as a function of the angle; negative values mark the forbidden region.
pub fn theta_rate_squared(phi: &CovectorInit, body: &ConvexBody, theta: f64) -> f64 {
    radicand(phi, body, theta) / body.polar_radius(theta).powi(4)
}

/// Angle dynamics in the frame rotated by `θ*`: the polar curve becomes
/// `r̃(θ̃) = r(θ̃ − θ*)` and the radicand reads `φ3² + 2n(r̃ sin θ̃ − r̃0 sin θ̃0)`.
#[derive(Debug, Clone)]
pub struct RotatedProblem {
    pub theta_star: f64,
    pub body: ConvexBody,
    pub theta0: f64,
    /// `√(φ4² + φ5²)`.
    pub scale: f64,
}

impl RotatedProblem {
    pub fn polar_radius(&self, theta_tilde: f64) -> f64 {
        self.body.polar_radius(theta_tilde)
    }

    /// `θ̃̇²` in rotated variables.
    pub fn theta_rate_squared(&self, phi: &CovectorInit, theta_tilde: f64) -> f64 {
        let r = self.body.polar_radius(theta_tilde);
        let r0 = self.body.polar_radius(self.theta0);
        let num = phi.phi3().powi(2) + 2.0 * self.scale * (r * theta_tilde.sin() - r0 * self.theta0.sin());
        num / r.powi(4)
    }
}

pub fn rotate_frame(phi: &CovectorInit, body: &ConvexBody) -> Result<RotatedProblem, HamiltonianError> {
    if !phi.has_vertical_casimirs() {
        return Err(HamiltonianError::ZeroVerticalCasimirs);
    }
    let theta_star = (-phi.phi5()).atan2(phi.phi4());
    Ok(RotatedProblem {
        theta_star,
        body: body.rotated(theta_star),
        theta0: phi.theta0() + theta_star,
        scale: phi.phi4().hypot(phi.phi5()),
    })
}

/// Extremes of `ℓ·h` over `U*` and the polar-angle arcs where they are attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBounds {
    pub e_min: f64,
    pub e_max: f64,
    pub min_arc: AngleArc,
    pub max_arc: AngleArc,
}

/// `(E₋₁, E₀)`: the minimum and maximum of `φ5 h1 − φ4 h2` over `U*`.
pub fn energy_bounds(phi: &CovectorInit, body: &ConvexBody) -> Result<EnergyBounds, HamiltonianError> {
    if !phi.has_vertical_casimirs() {
        return Err(HamiltonianError::ZeroVerticalCasimirs);
    }
    let ell = phi.ell();
    let neg = [-ell[0], -ell[1]];
    Ok(EnergyBounds {
        e_min: -body.gauge(neg),
        e_max: body.gauge(ell),
        min_arc: body.extreme_arc(neg),
        max_arc: body.extreme_arc(ell),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn phi(p: [f64; 5]) -> CovectorInit {
        CovectorInit::new(p).unwrap()
    }

    #[test]
    fn h_at_identity_and_sample() {
        let f = phi([0.3, -0.2, 1.0, 0.5, 2.0]);
        assert_eq!(h_from_state(&f, GroupElement::IDENTITY).to_array(), f.phi);
        let h = h_from_state(&phi([0.0, 0.0, 1.0, 0.0, 0.0]), GroupElement::new(1.0, 1.0, 0.0, 0.0, 0.0));
        assert_eq!(h.to_array(), [-1.0, 1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn psi_pairs_to_h() {
        let f = phi([0.3, -0.2, 1.0, 0.5, 2.0]);
        let g = GroupElement::new(0.7, -1.1, 0.4, 2.0, -3.0);
        let via_frame = pair_with_frame(psi_closed_form(&f, g), g);
        let direct = h_from_state(&f, g);
        for (a, b) in via_frame.to_array().iter().zip(direct.to_array()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn casimir_values() {
        assert_eq!(casimirs(&phi([0.0, 0.0, 1.0, 0.0, 0.0])), (0.0, 0.0, 0.5));
        assert_eq!(casimirs(&phi([1.0, 0.0, 0.0, 0.0, 1.0])), (0.0, 1.0, 1.0));
        assert_eq!(CovectorInit::new([0.0; 5]), Err(HamiltonianError::ZeroCovector));
    }

    #[test]
    fn disc_radicand() {
        let d = ConvexBody::disc(1.0).unwrap();
        let f = phi([1.0, 0.0, 0.0, 0.0, 1.0]);
        for th in [0.3, 1.0, 2.5, -0.7] {
            assert!((radicand(&f, &d, th) + 2.0 * (th.cos() - 1.0)).abs() < 1e-15);
        }
        assert_eq!(radicand(&f, &d, 0.0), 0.0);
    }

    #[test]
    fn rotation_angles() {
        let d = ConvexBody::disc(1.0).unwrap();
        assert_eq!(rotate_frame(&phi([1.0, 0.0, 0.0, 1.0, 0.0]), &d).unwrap().theta_star, 0.0);
        let r = rotate_frame(&phi([1.0, 0.0, 0.0, 0.0, 1.0]), &d).unwrap();
        assert!((r.theta_star + PI / 2.0).abs() < 1e-15);
        assert!(matches!(rotate_frame(&phi([1.0, 0.0, 1.0, 0.0, 0.0]), &d), Err(HamiltonianError::ZeroVerticalCasimirs)));
    }

    #[test]
    fn bounds_disc_and_square() {
        let f = phi([1.0, 0.0, 0.0, 0.0, 1.0]);
        for body in [ConvexBody::disc(1.0).unwrap(), ConvexBody::unit_square()] {
            let b = energy_bounds(&f, &body).unwrap();
            assert!((b.e_min + 1.0).abs() < 1e-15 && (b.e_max - 1.0).abs() < 1e-15);
        }
    }
}
