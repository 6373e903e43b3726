//! Command-line surface of the `selftest` library.
//!
//! Exit codes: 0 when every checked row passes, 1 when a check fails,
//! 2 on any input error (unreadable or malformed files, invalid devices,
//! invalid specs or flags).

pub mod commands;
pub mod document;
pub mod table;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] selftest::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INPUT
    }
}

pub use commands::{run, Cli};
