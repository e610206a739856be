//! Evaluation harness: coverage metrics, the synthetic benchmark series, CSV
//! ingestion, multi-seed sweeps and report files.

pub mod csv_io;
pub mod metrics;
pub mod report;
pub mod sweep;
pub mod synthetic;

pub use csv_io::{load_csv, write_series_csv, CsvSchema};
pub use metrics::{piaw, picp, Piaw};
pub use report::{emit_report, write_intervals_csv};
pub use sweep::{
    run_sweep, DatasetSpec, EvalRow, SummaryRow, SweepConfig, SweepEntry, SweepOutcome,
};
pub use synthetic::generate_synthetic;
