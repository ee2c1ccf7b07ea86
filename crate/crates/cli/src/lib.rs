//! Library half of the `distkit` command-line tool.

pub mod commands;
pub mod error;
pub mod records;
pub mod selfcheck;
pub mod spec;

pub use error::{CliError, CliResult};
pub use spec::{BijectorSpec, Components, ModelSpec, ParamValue};
