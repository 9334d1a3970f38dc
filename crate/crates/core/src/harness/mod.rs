//! Sweeps, CSV output and the command-line front end.

pub mod cli;
pub mod config;
pub mod csv;
pub mod experiment;

pub use cli::cli_main;
pub use config::{DStar, EngineSelection, ExperimentConfig, TopologySpec};
pub use csv::{emit_csv, format_g6};
pub use experiment::{run_experiment, SeriesPoint};
