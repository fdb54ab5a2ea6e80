//! Batch experiment driver for the chain laboratory.
//!
//! The library half parses experiment configs, dispatches to the core
//! solvers and engines, and writes machine-readable reports plus CSV plot
//! data; the `nhmc` binary wraps it with subcommands. Reports are fully
//! deterministic for a fixed config and seed: no timestamps, no
//! environment-dependent fields, fixed field order.

pub mod config;
pub mod report;
pub mod runner;
pub mod serialize;

pub use config::{parse_config, ConfigError, ExperimentConfig};
pub use report::ExperimentReport;
pub use runner::{run_experiment, RunOptions};

/// Exit codes: distinct classes for config vs numeric failures.
pub mod exit_codes {
    /// Every certificate in the run passed.
    pub const SUCCESS: i32 = 0;
    /// At least one numeric certificate failed.
    pub const CERTIFICATE_FAILURE: i32 = 1;
    /// Config parse or validation error.
    pub const CONFIG_ERROR: i32 = 2;
    /// Filesystem error.
    pub const IO_ERROR: i32 = 3;
}
