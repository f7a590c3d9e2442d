//! Monte Carlo harness, experiment config and report output for
//! `vericomp-core`.

pub mod config;
pub mod error;
pub mod harness;
pub mod report;
pub mod stats;

pub use config::ExperimentConfig;
pub use error::SimError;
pub use harness::{run_cell, run_grid, CellResult, Report};
pub use report::{compare_to_reference, emit_csv, to_csv, ComparisonTable};
