//! Feature screening from CSV files: load, standardize, score each feature
//! against a categorical label, rank, and report.

pub mod data;
pub mod error;
pub mod screen;
pub mod single;

pub use data::{load_csv, standardize, ColumnSelector};
pub use error::{CliError, Result};
pub use screen::{rank_features, run_screening, ScreenStatistic, ScreeningConfig, ScreeningReport};
