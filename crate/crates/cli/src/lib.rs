//! Configuration, commands and output records behind the `zitter` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
