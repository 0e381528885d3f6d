//! IO, file formats, the completion backend client and the command line
//! for the issue-assignment benchmark.

pub mod backend;
pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod ingest;

pub use error::{exit, BenchError, Result};
