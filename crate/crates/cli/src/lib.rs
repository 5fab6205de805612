//! Front end for the `blockdro` command: configuration, subcommands, experiment drivers and
//! the mapping from errors to exit codes.

pub mod commands;
pub mod config;
pub mod experiments;

use blockdro::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

/// Solver trouble exits with 3; anything about the inputs exits with 2.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::SolveFailed { .. } | Error::Solver(_) | Error::NegativePhi(_) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}
