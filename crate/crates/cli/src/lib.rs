//! The `mpp` command-line front end and its randomized simplification harness.

mod commands;
pub mod harness;

pub use commands::{run, EXIT_INEQUIVALENT, EXIT_OK, EXIT_PARSE, EXIT_SEMANTIC, EXIT_USAGE};
