#![no_std]

//! Numerical core for the homogenized optimal boundary-control problem with
//! critically scaled particles and dynamic boundary conditions.
//!
//! The limit problem lives on a fixed domain Ω with a controlled subregion ω.
//! Its zeroth-order "strange term" is non-local in time and is expressed
//! through a family of memory operators (`M`, `G`, `H` and their adjoints),
//! all implemented in [`time`]. On top of these sit the space-time state and
//! adjoint solvers ([`state`], [`optimality`]) and the limit cost functional
//! ([`cost`]).
//!
//! The crate is `no_std` and only needs `alloc`.

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod cg;
pub mod cost;
pub mod model;
pub mod optimality;
pub mod params;
pub mod space;
pub mod state;
pub mod time;
pub mod tridiag;

pub use error::{Error, Result};
pub use params::{cell_capacity_oracle, make_params, BoxRegion, ModelParams};
pub use model::Model;
pub use space::{Region, SpaceTimeField, SpatialGrid, SubdomainMask};
pub use state::{SolveReport, SolverOptions, StateProblem};
pub use time::{MemoryOperators, TimeGrid, TimeOpTag, TimeSeries};
pub use cost::{evaluate_j0, CostBreakdown};
pub use optimality::{direct_minimize, solve_optimality, DescentOptions, OptimalityOptions, OptimalityResult};
