//! Command-line orchestration for the `perron` binary: configuration,
//! atomic output, subcommands and the invariant suite.

pub mod commands;
pub mod config;
pub mod io;
pub mod validate;
