//! Command-line experiment driver for the `tree-entropy` crate.

pub mod args;
pub mod commands;
pub mod converge;
pub mod error;
pub mod experiment;
pub mod record;
