//! Command-line front end for `escape-core`: configuration parsing and the
//! `solve`, `sweep`, `simulate` and `compare` commands.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
