//! Experiment driver for the `adhist` engine: configuration, timing helpers
//! and the five benchmark modes behind the `adhist` binary.

pub mod config;
pub mod harness;
pub mod modes;

pub use config::{Args, Mode, RunConfig};
pub use modes::{run, ModeOutput};
