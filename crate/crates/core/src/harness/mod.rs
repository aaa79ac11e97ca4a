//! Evaluation harness: ingestion, normalization, the split protocols,
//! metrics, least-squares baselines and benchmark reports.

mod bench;
mod data;
mod metrics;

pub use bench::{
    run_benchmark, run_benchmark_to, BenchConfig, BenchReport, DatasetConfig, Failure, JobSummary, ReportRow,
    CSV_HEADER,
};
pub use data::{ingest_csv, normalize, split, write_csv, Ingested, SplitKind, SplitSpec, DEFAULT_FRACTION};
pub use metrics::{compute_metrics, run_baselines, Baseline, LeastSquaresModel, Metrics};
