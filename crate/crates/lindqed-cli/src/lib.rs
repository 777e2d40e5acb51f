//! Library surface of the command-line driver, exposed so integration
//! tests can run commands in-process and parse the emitted reports.

pub mod commands;
pub mod config;
pub mod output;
