//! Command-line front end: solution files, mesh export and the verification
//! suites.

pub mod commands;
pub mod export;
pub mod solution;
pub mod suites;

/// Environment variable capping the worker threads.
pub const THREADS_VAR: &str = "DIHEDRAL_FORGE_THREADS";
