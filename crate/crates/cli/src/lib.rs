//! Command-line front end: data synthesis, corruption, training presets,
//! evaluation, sweeps, gradient checks and report tables.

pub mod cli;
pub mod commands;
pub mod config;
pub mod pipeline;
pub mod preset;
pub mod provenance;

pub use cli::{exit_code, run, Cli};
pub use config::RunConfig;
pub use preset::Preset;
