//! Command-line front end for `hugevar`: TOML configuration, the
//! `simulate`/`fit`/`forecast` subcommands and the timing harness.

pub mod bench;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use error::{CliError, Result};
