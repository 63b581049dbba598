//! Penalized least-squares estimators.

pub mod ols;
pub mod path;
pub mod penalty;

pub use ols::{ols, ols_from_gram};
pub use path::{fit_path, fit_path_prepared, lambda_grid, nonzero_support, PathFamily, PathOptions, Prepared, RegPath};
pub use penalty::{penalty_value, soft_threshold, PenaltyKind, PenaltySpec};
