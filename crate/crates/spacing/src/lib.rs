//! File formats, parallel study runner and command line for `spacing-core`.

pub mod cli;
pub mod format;
pub mod parallel;
pub mod spec;
