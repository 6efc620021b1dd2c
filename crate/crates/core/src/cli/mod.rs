//! Command-line front end: configuration, initial-data families,
//! subcommands and sweeps.

pub mod commands;
pub mod config;
pub mod families;
pub mod sweep;
