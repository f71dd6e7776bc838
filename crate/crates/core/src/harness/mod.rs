//! Configuration, ensemble persistence and the command implementations
//! behind the `herald` binary.

mod commands;
pub mod config;
pub mod io;

pub use commands::{
    analyze_tables, chiral_summary, cmd_analyze, cmd_chiral, cmd_exact, cmd_meanfield, cmd_run, cmd_sweep,
    ensemble_file_name, run_cell, ChiralSummary,
};
pub use config::{preset, Config, KEYS};
pub use io::{load_ensembles, read_verified, EnsembleTable, RunManifest};
