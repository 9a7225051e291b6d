//! Experiment runner for `brdm-core`: configuration files, the `baseline`,
//! `run` and `plot` commands, CSV output and diagnostic file formats.
//!
//! All numeric work happens in `brdm-core`; this crate adds IO and
//! orchestration.

// Negated comparisons in validation deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod config;
mod error;
pub mod formats;
pub mod output;
pub mod plot;
pub mod run;
pub mod table;

pub use baseline::cmd_baseline;
pub use config::{load_config, parse_config, AgentKind, ConfigError, ExperimentConfig};
pub use error::{CliError, Result};
pub use output::OutputDir;
pub use plot::cmd_plot;
pub use run::cmd_run;
