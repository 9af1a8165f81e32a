//! Batch evaluation harness: manifest-driven metric reports with SRCC
//! validation, vowel-space export, and statistics over pre-computed tables
//! and listening-test submissions.

pub mod compute;
pub mod error;
pub mod manifest;
pub mod metrics;
pub mod report;
pub mod subset;
pub mod vowelspace;

pub use error::{HarnessError, Result};
pub use manifest::EvalManifest;
pub use metrics::{select_metrics, Metric};
pub use report::{run_report, MetricReport, ReportOptions};
