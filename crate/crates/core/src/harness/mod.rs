//! Metrics, method pipelines, the synthetic benchmark, run configuration,
//! streaming and report emission.

mod config;
mod detector;
mod evaluate;
mod metrics;
mod pipeline;
mod stream;
mod synthetic;

pub use config::{CaseEntry, CsvData, DataConfig, FileEntry, RunConfig};
pub use detector::Detector;
pub use evaluate::{
    emit_report, load_cases, median, medians, render_table, run_evaluation, run_method,
    trace_file_name, CaseData, EvaluationReport, MedianRow, MethodRun, ReportRow, REPORT_FORMAT,
};
pub use metrics::{accuracy, auc, confusion, f1_score, false_alarm_rate, Confusion};
pub use pipeline::{
    fit_method, trace_metrics, FittedMethod, MethodId, MethodSettings, Metrics, Prepared,
    PretrainCache, ScoringSettings,
};
pub use stream::{StreamEvent, StreamingDetector};
pub use synthetic::{ScenarioData, SyntheticScenario};
