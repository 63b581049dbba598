//! Simulation and benchmarking toolkit for sparse support recovery in
//! linear regression.

pub mod analysis;
pub mod cli;
pub mod difficulty;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod selection;
pub mod simdesign;
pub mod solvers;
pub mod uoi;

pub use error::{Error, Result};
