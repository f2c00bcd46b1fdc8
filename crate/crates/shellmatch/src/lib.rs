//! Command line driver for `shellmatch-core`: run configs, shape and grid
//! file formats, checkpoints and reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use shellmatch_core::geometry::ShapeError;
use shellmatch_core::optimizer::DescentError;

pub mod checkpoint;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod verify;

pub use config::RunConfig;
pub use pipeline::{configure_threads, run, run_gamma, Outcome};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("format: {0}")]
    Format(String),
    #[error("{}: {}", .0.display(), .1)]
    Shape(PathBuf, #[source] ShapeError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("descent: {0}")]
    Descent(#[from] DescentError),
}

impl Error {
    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Io(..) => "io",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Shape(..) => "shape",
            Error::Checkpoint(_) => "checkpoint",
            Error::Descent(_) => "descent",
        }
    }
}
