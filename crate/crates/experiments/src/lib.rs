//! Seeded parameter sweeps: every grid point, scheme and network
//! realization is one independent run, aggregated into a CSV table.

pub mod config;
pub mod sweep;
pub mod table;

pub use config::{ExperimentConfig, SweepVariable};
pub use sweep::{run_sweep, run_sweep_with, RunOutcome, RunRecord, SweepResult};
pub use table::{emit_csv, parse_csv, to_csv_string, SummaryRow, SweepTable};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("nothing to write: the table has no rows")]
    EmptyTable,
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("malformed table: {0}")]
    Parse(String),
    #[error("worker pool: {0}")]
    Pool(String),
}
