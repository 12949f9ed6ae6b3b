//! Command-line front end of `homopt-core`: configuration, file formats,
//! run orchestration and the executable verification suite.

pub mod commands;
pub mod config;
pub mod export;
pub mod suite;

pub use commands::{cmd_optimize, cmd_solve, cmd_sweep, cmd_verify, Axis, Exit};
pub use config::RunConfig;
