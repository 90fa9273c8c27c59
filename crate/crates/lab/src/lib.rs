//! Experiment runner for the k-Diff numerical laboratory.
//!
//! Each subcommand reads an [`ExperimentConfig`], runs one of the core
//! experiments and writes plot-ready CSV plus a JSON summary into the
//! configured output directory.

pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;

use std::path::PathBuf;

pub use commands::{run, Check, Command, Report};
pub use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] kdiff_core::Error),
}

impl LabError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        LabError::Invalid(msg.into())
    }

    /// Name of the run-time invariant a numerical failure violates, if any.
    pub fn violated_invariant(&self) -> Option<&'static str> {
        match self {
            LabError::Core(kdiff_core::Error::Divergence { .. }) => Some("bounded_loss"),
            LabError::Core(kdiff_core::Error::NonFiniteLoss { .. }) => Some("finite_loss"),
            LabError::Core(kdiff_core::Error::NonFiniteState { .. }) => Some("finite_state"),
            _ => None,
        }
    }
}
