//! Independent reference solvers for the homopt test suites.
//!
//! Nothing here depends on `homopt-core`; inputs are plain numbers and
//! closures so that agreement with the production code is evidence rather
//! than tautology.

pub mod dense;
pub mod ode;

pub use dense::{DenseProblem, TimeMatrices};
pub use ode::{picard_h, relax, rk4, shoot_bvp, RobinEnd};
