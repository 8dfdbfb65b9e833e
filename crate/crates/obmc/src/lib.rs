//! Experiment harness and command-line front end for logistic 1-bit matrix
//! completion.
//!
//! The numerical work lives in [`obmc_core`]; this crate adds configuration
//! files, replicated parameter sweeps on a thread pool, CSV and text matrix
//! formats, log-log rate tables and a small SVG plotter.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod io;
pub mod plot;
pub mod table;

pub use config::{SolverDefaults, SweepConfig, TruthMode};
pub use error::{Error, Result};
pub use experiments::{run_cell, run_sweep, Aggregate, CellKey, CellResult, ReplicateRecord};
pub use obmc_core;
