//! Experiment front-end: task streams, configuration, dispatch to the method or a
//! baseline, and run records with their reports.

mod config;
mod csv_stream;
mod record;
mod stream;

pub use config::{ExperimentConfig, LoadedStream, Method, StreamSource};
pub use csv_stream::{load_csv_stream, CsvOptions, CsvReport, LabelColumn, MalformedRows};
pub use record::{report, run_experiment, write_atomic, ReportFormat, RunRecord, TaskRecord};
pub use stream::{generate_blob_stream, generate_reference_task, BlobSpec, TaskStream, MIN_SAMPLES_PER_SPLIT};
