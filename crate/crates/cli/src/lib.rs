//! Experiment harness for `nearpot-core`: TOML configs, seeded fan-out,
//! line-delimited logs, summary records and CSV plot data.

pub mod compare;
pub mod config;
pub mod emit;
pub mod error;
pub mod experiment;

pub use compare::{compare_learn_vs_flow, CompareReport, Verdict};
pub use config::{ExperimentConfig, GameSource, Mode, OUTPUT_DIR_ENV};
pub use emit::{emit_plot_data, SeriesSelection, KNOWN_SERIES};
pub use error::{CliError, Result};
pub use experiment::{resolve_output_dir, run_experiment, RunRecord, SeedSummary, SUMMARY_FILE};
