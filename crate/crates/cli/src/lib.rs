//! Configuration, output formats and commands of the `chd-sharp` binary.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod io;

pub use config::{parse_config, RunConfig};
