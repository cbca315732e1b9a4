//! Experiment runner for the geoflow verification suites. Each experiment
//! reads an [`ExperimentConfig`], runs its seeded cases and returns a
//! [`Table`] of CSV rows together with any threshold violations.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{run, Table};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] geoflow::GeoError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
