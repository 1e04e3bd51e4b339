//! Implementation of the `pwreg` binary: CSV ingestion, the four
//! subcommands, and the stable report format. The numerical work lives in
//! the `pwreg` library crate; this crate only adapts it to files, flags, and
//! exit codes.

pub mod cli;
pub mod commands;
pub mod csvio;
pub mod report;

pub use commands::{run, Failure};
