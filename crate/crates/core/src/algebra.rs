//! The Cartan algebra and group in coordinates of the first kind.
//!
//! Basis `X, Y, Z, V, W` with `[X,Y] = Z`, `[X,Z] = V`, `[Y,Z] = W`; all other
//! brackets vanish. The exponential map is a global diffeomorphism, so a group
//! element and its logarithm share the same five coordinates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::ode::{self, OdeError, OdeOptions};

/// Coefficient of the first-order (bracket) term of the group law.
pub const HALF: f64 = 0.5;
/// Coefficient of the second-order (double bracket) terms of the group law.
pub const TWELFTH: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AlgebraError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("flow integration failed: {0}")]
    Integration(#[from] OdeError),
}

/// Element `xX + yY + zZ + vV + wW` of the Lie algebra.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AlgebraVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub v: f64,
    pub w: f64,
}

/// Point of the group in first-kind coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupElement {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub v: f64,
    pub w: f64,
}

macro_rules! five_coords {
    ($t:ty) => {
        impl $t {
            pub const fn new(x: f64, y: f64, z: f64, v: f64, w: f64) -> Self {
                Self { x, y, z, v, w }
            }

            pub const fn to_array(self) -> [f64; 5] {
                [self.x, self.y, self.z, self.v, self.w]
            }

            pub const fn from_array(a: [f64; 5]) -> Self {
                Self::new(a[0], a[1], a[2], a[3], a[4])
            }

            pub fn max_abs_diff(&self, other: &Self) -> f64 {
                self.to_array()
                    .iter()
                    .zip(other.to_array())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            }

            pub fn is_finite(&self) -> bool {
                self.to_array().iter().all(|c| c.is_finite())
            }
        }

        impl From<[f64; 5]> for $t {
            fn from(a: [f64; 5]) -> Self {
                Self::from_array(a)
            }
        }
    };
}

five_coords!(AlgebraVector);
five_coords!(GroupElement);

impl AlgebraVector {
    pub const X: Self = Self::new(1.0, 0.0, 0.0, 0.0, 0.0);
    pub const Y: Self = Self::new(0.0, 1.0, 0.0, 0.0, 0.0);
    pub const Z: Self = Self::new(0.0, 0.0, 1.0, 0.0, 0.0);
    pub const V: Self = Self::new(0.0, 0.0, 0.0, 1.0, 0.0);
    pub const W: Self = Self::new(0.0, 0.0, 0.0, 0.0, 1.0);

    pub fn scale(self, k: f64) -> Self {
        Self::from_array(self.to_array().map(|c| k * c))
    }

    pub fn add(self, o: Self) -> Self {
        let (a, b) = (self.to_array(), o.to_array());
        Self::from_array(std::array::from_fn(|i| a[i] + b[i]))
    }
}

impl GroupElement {
    pub const IDENTITY: Self = Self::new(0.0, 0.0, 0.0, 0.0, 0.0);

    /// The group element `exp(a)`; the identity map in first-kind coordinates.
    pub fn exp(a: AlgebraVector) -> Self {
        Self::from_array(a.to_array())
    }

    pub fn log(self) -> AlgebraVector {
        AlgebraVector::from_array(self.to_array())
    }
}

/// Lie bracket `[a, b]`.
pub fn bracket(a: AlgebraVector, b: AlgebraVector) -> AlgebraVector {
    AlgebraVector::new(
        0.0,
        0.0,
        a.x * b.y - b.x * a.y,
        a.x * b.z - b.x * a.z,
        a.y * b.z - b.y * a.z,
    )
}

/// Group product in first-kind coordinates (the step-3 Campbell–Hausdorff series).
pub fn group_mul(g1: GroupElement, g2: GroupElement) -> GroupElement {
    let GroupElement { x: x1, y: y1, z: z1, v: v1, w: w1 } = g1;
    let GroupElement { x: x2, y: y2, z: z2, v: v2, w: w2 } = g2;
    GroupElement::new(
        x1 + x2,
        y1 + y2,
        z1 + z2 + HALF * (x1 * y2 - x2 * y1),
        v1 + v2
            + HALF * (x1 * z2 - x2 * z1)
            + TWELFTH * (x1 * x1 * y2 - x1 * x2 * y1 - x1 * x2 * y2 + x2 * x2 * y1),
        w1 + w2
            + HALF * (y1 * z2 - y2 * z1)
            + TWELFTH * (x1 * y1 * y2 + x2 * y1 * y2 - x2 * y1 * y1 - x1 * y2 * y2),
    )
}

/// Inverse element: coordinatewise negation.
pub fn group_inv(g: GroupElement) -> GroupElement {
    GroupElement::from_array(g.to_array().map(|c| -c))
}

/// Coordinate vectors of the left-invariant fields `X, Y, Z, V, W` at `g`.
pub fn left_invariant_frame(g: GroupElement) -> [[f64; 5]; 5] {
    let GroupElement { x, y, z, .. } = g;
    [
        [1.0, 0.0, -HALF * y, -HALF * z - TWELFTH * x * y, -TWELFTH * y * y],
        [0.0, 1.0, HALF * x, TWELFTH * x * x, TWELFTH * x * y - HALF * z],
        [0.0, 0.0, 1.0, HALF * x, HALF * y],
        [0.0, 0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0],
    ]
}

/// Velocity `dl_g(a)` of the left translation of `a` to `g`.
pub fn left_translate(g: GroupElement, a: AlgebraVector) -> [f64; 5] {
    let frame = left_invariant_frame(g);
    let c = a.to_array();
    std::array::from_fn(|j| (0..5).map(|i| c[i] * frame[i][j]).sum())
}

/// Numerically integrates `ġ = dl_g(a)` from `g0` for time `t`; equals
/// `g0 · exp(t a)`. Independent of [`group_mul`], so it serves as an oracle
/// for the group law.
pub fn exp_flow(g0: GroupElement, a: AlgebraVector, t: f64, tol: f64) -> Result<GroupElement, AlgebraError> {
    if !(tol > 0.0) {
        return Err(AlgebraError::BadTolerance(tol));
    }
    let opts = OdeOptions::with_tol(tol / t.abs().max(1.0));
    let rhs = |_s: f64, y: &[f64; 5]| left_translate(GroupElement::from_array(*y), a);
    let end = ode::integrate(&rhs, 0.0, g0.to_array(), t, &opts)?;
    Ok(GroupElement::from_array(end))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_brackets() {
        assert_eq!(bracket(AlgebraVector::X, AlgebraVector::Y), AlgebraVector::Z);
        assert_eq!(bracket(AlgebraVector::X, AlgebraVector::Z), AlgebraVector::V);
        assert_eq!(bracket(AlgebraVector::Y, AlgebraVector::Z), AlgebraVector::W);
        assert_eq!(bracket(AlgebraVector::V, AlgebraVector::W), AlgebraVector::default());
        assert_eq!(bracket(AlgebraVector::Z, AlgebraVector::V), AlgebraVector::default());
    }

    #[test]
    fn product_of_generators() {
        let g = group_mul(GroupElement::new(1.0, 0.0, 0.0, 0.0, 0.0), GroupElement::new(0.0, 1.0, 0.0, 0.0, 0.0));
        let want = GroupElement::new(1.0, 1.0, 0.5, 1.0 / 12.0, -1.0 / 12.0);
        assert!(g.max_abs_diff(&want) < 1e-16);
        let flowed = exp_flow(GroupElement::exp(AlgebraVector::X), AlgebraVector::Y, 1.0, 1e-12).unwrap();
        assert!(flowed.max_abs_diff(&want) < 1e-10);
    }

    #[test]
    fn identity_and_inverse() {
        let g = GroupElement::new(1.0, 2.0, 3.0, 4.0, 5.0);
        assert_eq!(group_mul(GroupElement::IDENTITY, g), g);
        assert_eq!(group_mul(g, GroupElement::IDENTITY), g);
        assert_eq!(group_inv(g), GroupElement::new(-1.0, -2.0, -3.0, -4.0, -5.0));
        assert_eq!(group_inv(GroupElement::IDENTITY), GroupElement::IDENTITY);
        assert!(group_mul(g, group_inv(g)).max_abs_diff(&GroupElement::IDENTITY) < 1e-12);
    }

    #[test]
    fn frame_at_identity_and_sample_point() {
        let f = left_invariant_frame(GroupElement::IDENTITY);
        assert_eq!(f[0], [1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f[1], [0.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f[2], [0.0, 0.0, 1.0, 0.0, 0.0]);
        let f = left_invariant_frame(GroupElement::new(2.0, 0.0, 0.0, 0.0, 0.0));
        let want = [0.0, 1.0, 1.0, 1.0 / 3.0, 0.0];
        for (a, b) in f[1].iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn flow_along_x_is_linear() {
        let g = exp_flow(GroupElement::IDENTITY, AlgebraVector::X, 2.5, 1e-12).unwrap();
        assert!(g.max_abs_diff(&GroupElement::new(2.5, 0.0, 0.0, 0.0, 0.0)) < 1e-14);
    }

    #[test]
    fn flow_rejects_bad_tolerance() {
        assert!(matches!(
            exp_flow(GroupElement::IDENTITY, AlgebraVector::X, 1.0, 0.0),
            Err(AlgebraError::BadTolerance(_))
        ));
    }
}
