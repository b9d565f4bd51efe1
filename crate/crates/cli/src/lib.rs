//! Command-line front end for `adlab-core`.

pub mod commands;
pub mod report;
pub mod statefile;
