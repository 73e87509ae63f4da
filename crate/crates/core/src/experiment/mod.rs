//! Configured experiments behind the `cnls-lab` binary: presets, run
//! directories, CSV/JSON artifacts and parameter scans.

pub mod commands;
pub mod config;
pub mod output;
pub mod suite;

pub use commands::{
    cmd_evolve, cmd_minimize, cmd_morawetz, cmd_scan, exit_code_for, run_evolve, run_verify,
    EXIT_CHECK, EXIT_NUMERIC, EXIT_PASS, EXIT_USAGE,
};
pub use config::{Ini, InitialData, RunConfig, ScanFamily};
pub use output::output_root;
