//! Experiment harness: configs, image ingestion, sweeps, report bundles and
//! the command-line front end.

pub mod cli;
pub mod config;
pub mod ingest;
pub mod output;
pub mod sweep;

pub use config::{DatasetSource, ExperimentConfig, MeasureTarget, OperatorFamily};
pub use sweep::{run_sweep, solve_one, CellChoice, RunRecord, SweepReport};
