//! Experiment specs, sweep orchestration and CSV output for the `tdcb` tool.

pub mod error;
pub mod experiment;
pub mod spec;

pub use error::CliError;
pub use experiment::{run_experiment, run_experiment_results, write_csv, Row, CSV_COLUMNS};
pub use spec::{load_spec, save_spec, ExperimentSpec};
