//! Sweep configuration, enumeration, execution and persistence.

pub mod config;
pub mod record;
pub mod store;
pub mod task;

pub use config::{CovarianceEntry, SweepConfig};
pub use record::{CoefRow, SweepRecord};
pub use store::{load_store, merge_store, read_coefs, read_ledger, read_records, run_sweep, SweepOptions, SweepSummary};
pub use task::{enumerate_tasks, run_task, stable_seed, Task, TaskOutput};
