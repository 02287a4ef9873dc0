//! Extremals of left-invariant sub-Finsler quasimetrics on the Cartan group.
//!
//! The crate is organised bottom-up: [`algebra`] (group law and frame),
//! [`convex`] (control bodies and their polar curves), [`hamiltonian`]
//! (vertical coordinates and first integrals), [`solver`] (classification and
//! closed-form reconstruction), [`oracle`] (direct integration of the
//! Hamiltonian system) and [`cli`].

pub mod algebra;
pub mod cli;
pub mod convex;
pub mod hamiltonian;
pub mod numeric;
pub mod oracle;
pub mod solver;
