//! Self-contained numerical kernels: adaptive quadrature, explicit ODE stepping
//! and scalar root finding.

pub mod ode;
pub mod quad;
pub mod roots;
