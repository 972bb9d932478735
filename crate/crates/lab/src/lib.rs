//! Configuration-driven experiment runner for `holonomy-core`.
//!
//! A run reads an [`ExperimentConfig`], executes one command pipeline, and writes
//! CSV tables, a `summary.csv` of gated quantities, a `report.txt` and a
//! `manifest.toml` with SHA-256 digests of every file it wrote.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod output;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use output::{Gate, RunManifest};
pub use pipeline::{run_experiment, Command};
pub use report::emit_report;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lab.md")]
mod book_lab {}

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid config at `{path}`: {msg}")]
    ConfigInvalid { path: String, msg: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: holonomy_core::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
