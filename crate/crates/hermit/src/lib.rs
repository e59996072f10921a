//! File formats, experiment runners and the command-line interface for the
//! `hermit-core` tagger.
//!
//! Exit codes of the binary: 0 success, 1 usage error, 2 data or
//! configuration fault, 3 internal failure.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod embeddings;
pub mod error;
pub mod manifest;
pub mod nlubm;
pub mod reports;
pub mod settings;

pub use error::{AppError, Result};
