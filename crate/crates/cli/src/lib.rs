//! Operator CLI and JSON service for kgexplore.

pub mod commands;
pub mod error;
pub mod inputs;
pub mod service;

pub use error::{CliError, CliResult};
