//! Data ingestion, run orchestration and diagnostics for the colonisation
//! samplers in `rippler_core`.
//!
//! The `rippler` binary exposes three subcommands that map onto
//! [`simulate::run_simulate`], [`infer::run_infer`] and
//! [`diagnose::run_diagnose`].

pub mod config;
pub mod dataset;
pub mod diagnose;
pub mod error;
pub mod formats;
pub mod infer;
pub mod simulate;
pub mod svg;

pub use config::{Algorithm, RunConfig};
pub use dataset::Dataset;
pub use error::{CliError, CliResult};
