//! Moment-kernel control of heterogeneous unicycle ensembles.
//!
//! A population of unicycles whose linear and angular traction share one
//! unknown scalar `β ∈ [lo, hi]` is driven by a single broadcast control.
//! The ensemble state, viewed as a function of `β`, is represented by its
//! truncated Fourier–Legendre coefficients (the moment vector). The moment
//! vector obeys a finite bilinear system, and state-space constraints
//! (keep-in polyhedra, polyhedral obstacles, temporal-logic visit tasks) map
//! to linear or disjunctive constraints on it. [`ocp`] solves the resulting
//! optimal-control problems and checks the answer by rolling the control out
//! across sampled members.
//!
//! Module map:
//!
//! * [`legendre`]: orthonormal Legendre basis, recurrence, roots, signed-part integrals.
//! * [`ensemble`]: lifted unicycle model and per-member / population rollout.
//! * [`moments`]: forward/inverse moment transform and truncated moment dynamics.
//! * [`geometry`]: polyhedra, obstacles and their moment-space images.
//! * [`stl`]: STL formulas over moment signals with exact and smooth robustness.
//! * [`ocp`]: direct single-shooting optimal control, binaries, receding horizon.
//! * [`export`]: CSV writers for trajectories and constraint tables.

pub mod ensemble;
pub mod error;
pub mod export;
pub mod geometry;
pub mod legendre;
pub mod moments;
pub mod ocp;
pub mod par;
pub mod stl;

pub use error::{Error, Result};
