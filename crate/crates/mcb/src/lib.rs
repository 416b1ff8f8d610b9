//! Command-line companion to `mcb-core`: run configuration, file
//! formats (CSV curves and tables, JSON reports), and the subcommand
//! backends, including the parallel screening driver.

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;

pub use commands::{
    configure_threads, decide, effort_rows, lowerbound_rows, prob_rows, run_screen, table2,
};
pub use config::{parse_bucket_spec, RunConfig};
pub use error::McbError;
pub use formats::{EffortRow, Table2Row};

pub use mcb_core as core;
