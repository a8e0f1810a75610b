//! Benchmark harness for the soft top-k operators: timed sweeps over `(n, k)`,
//! CSV records, SVG charts, and the `softtopk` command line.

pub mod chart;
pub mod cli;
pub mod error;
pub mod gradsweep;
pub mod list;
pub mod record;
pub mod sweep;

pub use chart::emit_charts;
pub use error::{BenchError, Result};
pub use gradsweep::{grad_case, GradSweep};
pub use list::parse_size_list;
pub use record::{emit_csv, format_sig9, read_csv, Algo, BenchRecord, CSV_HEADER};
pub use sweep::{run_sweep, SweepConfig, SweepOutput};
