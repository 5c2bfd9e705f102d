//! Experiment runner for hierarchical fuzzy inference trees: configuration,
//! training runs, reports and saved models.

pub mod commands;
pub mod config;
pub mod error;
pub mod model;
pub mod report;
pub mod run;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use model::Model;
