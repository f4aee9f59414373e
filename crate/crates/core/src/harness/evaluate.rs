use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{DataConfig, RunConfig};
use super::metrics::false_alarm_rate;
use super::pipeline::{
    fit_method, trace_metrics, FittedMethod, MethodId, MethodSettings, Metrics, Prepared,
    PretrainCache,
};
use crate::data::{make_splits, LabeledSeries, Splits};
use crate::detection::ScoreTrace;
use crate::error::{Error, Result};

pub const REPORT_FORMAT: u32 = 1;

/// Metrics of one method on one case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub case: String,
    pub method: MethodId,
    pub seed: u64,
    pub metrics: Metrics,
    pub threshold: f64,
    /// False-alarm rate on a fault-free stream of the same target, when one
    /// exists (synthetic data).
    pub clean_false_alarm_rate: Option<f64>,
    /// Score-trace file, relative to the report directory.
    pub trace: String,
}

/// Per-method medians over repeated synthetic seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub method: MethodId,
    pub runs: usize,
    pub accuracy: f64,
    pub f1: f64,
    /// Median over the runs whose AUC is defined.
    pub auc: Option<f64>,
    pub false_alarm_rate: f64,
    pub clean_false_alarm_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub medians: Vec<MedianRow>,
}

/// Result of running one method on one case.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub row: ReportRow,
    pub trace: ScoreTrace,
    pub fitted: FittedMethod,
}

pub fn trace_file_name(case: &str, method: MethodId) -> String {
    let safe: String = case
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("traces/{safe}__{method}.csv")
}

/// Fits `method`, scores the test stream (and the clean stream, if any) and
/// computes metrics. Rows lost to smoothing truncation are not scored.
pub fn run_method(
    method: MethodId,
    case: &str,
    prepared: &Prepared,
    test: &LabeledSeries,
    clean: Option<&LabeledSeries>,
    settings: &MethodSettings,
    cache: &mut PretrainCache,
) -> Result<MethodRun> {
    let mut inner = || -> Result<MethodRun> {
        let mut fitted = fit_method(method, prepared, settings, cache)?;
        let trace = fitted.detector.score(test)?;
        let metrics = trace_metrics(&trace)?;
        let clean_far = match clean {
            Some(c) => {
                let t = fitted.detector.score(c)?;
                Some(false_alarm_rate(&t.labels, &vec![0; t.labels.len()])?)
            }
            None => None,
        };
        let row = ReportRow {
            case: case.to_string(),
            method,
            seed: settings.train.seed,
            metrics,
            threshold: trace.threshold,
            clean_false_alarm_rate: clean_far,
            trace: trace_file_name(case, method),
        };
        Ok(MethodRun { row, trace, fitted })
    };
    inner().map_err(|e| e.context(format!("case {case}")))
}

/// One target domain, split and ready to run.
#[derive(Debug, Clone)]
pub struct CaseData {
    pub name: String,
    pub splits: Splits,
    /// Fault-free stream of the same target, when the data source has one.
    pub clean: Option<LabeledSeries>,
    /// Seed for data generation and training of this case.
    pub seed: u64,
}

pub fn load_cases(cfg: &RunConfig) -> Result<Vec<CaseData>> {
    match &cfg.data {
        DataConfig::Synthetic(scenario) => (0..cfg.repeats as u64)
            .map(|k| {
                let seed = cfg.seed.wrapping_add(k);
                let data = scenario.build(seed)?;
                let name = if cfg.repeats == 1 {
                    "synthetic".to_string()
                } else {
                    format!("synthetic_s{seed}")
                };
                Ok(CaseData {
                    name,
                    splits: data.splits,
                    clean: Some(data.clean_test),
                    seed,
                })
            })
            .collect(),
        DataConfig::Csv(csv) => {
            let source = csv
                .source
                .iter()
                .map(|f| f.load())
                .collect::<Result<Vec<_>>>()?;
            csv.cases
                .iter()
                .map(|case| {
                    let target = case
                        .files
                        .iter()
                        .map(|f| f.load())
                        .collect::<Result<Vec<_>>>()?;
                    let splits = make_splits(&source, &target, &csv.split)
                        .map_err(|e| e.context(format!("case {}", case.name)))?;
                    Ok(CaseData {
                        name: case.name.clone(),
                        splits,
                        clean: None,
                        seed: cfg.seed,
                    })
                })
                .collect()
        }
    }
}

/// Runs every configured method on every case, in config order. Each method
/// gets its own bundle; only the deterministic source pretraining is shared.
pub fn run_evaluation(cfg: &RunConfig) -> Result<(EvaluationReport, Vec<MethodRun>)> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for case in load_cases(cfg)? {
        let prepared = Prepared::new(&case.splits);
        let settings = cfg.method_settings(case.seed);
        let mut cache = PretrainCache::default();
        for &method in &cfg.methods {
            log::info!("case {}: running {method}", case.name);
            runs.push(run_method(
                method,
                &case.name,
                &prepared,
                &case.splits.test,
                case.clean.as_ref(),
                &settings,
                &mut cache,
            )?);
        }
    }
    let rows: Vec<ReportRow> = runs.iter().map(|r| r.row.clone()).collect();
    let medians = if cfg.repeats > 1 {
        medians(&cfg.methods, &rows)
    } else {
        Vec::new()
    };
    let report = EvaluationReport {
        format: REPORT_FORMAT,
        seed: cfg.seed,
        config: cfg.clone(),
        rows,
        medians,
    };
    Ok((report, runs))
}

/// Median of the finite values; NaN when there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn medians(methods: &[MethodId], rows: &[ReportRow]) -> Vec<MedianRow> {
    methods
        .iter()
        .map(|&method| {
            let mine: Vec<&ReportRow> = rows.iter().filter(|r| r.method == method).collect();
            let pick = |f: &dyn Fn(&ReportRow) -> Option<f64>| -> Option<f64> {
                let v: Vec<f64> = mine.iter().filter_map(|r| f(r)).collect();
                (!v.is_empty()).then(|| median(&v))
            };
            MedianRow {
                method,
                runs: mine.len(),
                accuracy: pick(&|r| Some(r.metrics.accuracy)).unwrap_or(f64::NAN),
                f1: pick(&|r| Some(r.metrics.f1)).unwrap_or(f64::NAN),
                auc: pick(&|r| r.metrics.auc),
                false_alarm_rate: pick(&|r| Some(r.metrics.false_alarm_rate)).unwrap_or(f64::NAN),
                clean_false_alarm_rate: pick(&|r| r.clean_false_alarm_rate),
            }
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.2}"),
        _ => "n/a".to_string(),
    }
}

/// Human-readable table, metrics rounded to two decimals.
pub fn render_table(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let case_w = report
        .rows
        .iter()
        .map(|r| r.case.len())
        .max()
        .unwrap_or(4)
        .max(4);
    let _ = writeln!(out, "seed {}", report.seed);
    let _ = writeln!(
        out,
        "{:<case_w$}  {:<11}  {:>5}  {:>5}  {:>5}  {:>5}  {:>9}",
        "case", "method", "acc", "f1", "auc", "far", "clean_far"
    );
    for r in &report.rows {
        let m = &r.metrics;
        let _ = writeln!(
            out,
            "{:<case_w$}  {:<11}  {:>5}  {:>5}  {:>5}  {:>5}  {:>9}",
            r.case,
            r.method.as_str(),
            cell(Some(m.accuracy)),
            cell(Some(m.f1)),
            cell(m.auc),
            cell(Some(m.false_alarm_rate)),
            cell(r.clean_false_alarm_rate),
        );
    }
    if !report.medians.is_empty() {
        let _ = writeln!(out);
        let _ = writeln!(out, "medians over {} seeds", report.config.repeats);
        for m in &report.medians {
            let _ = writeln!(
                out,
                "{:<case_w$}  {:<11}  {:>5}  {:>5}  {:>5}  {:>5}  {:>9}",
                "median",
                m.method.as_str(),
                cell(Some(m.accuracy)),
                cell(Some(m.f1)),
                cell(m.auc),
                cell(Some(m.false_alarm_rate)),
                cell(m.clean_false_alarm_rate),
            );
        }
    }
    out
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::parse("report", e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("report", e.to_string()))
    }
}

/// Writes `report.json`, `report.txt` and one score trace per row into `dir`.
pub fn emit_report(report: &EvaluationReport, traces: &[&ScoreTrace], dir: &Path) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::Usage("report has no rows".into()));
    }
    if traces.len() != report.rows.len() {
        return Err(Error::dim("score traces", report.rows.len(), traces.len()));
    }
    std::fs::create_dir_all(dir.join("traces"))?;
    std::fs::write(dir.join("report.json"), report.to_json()?)?;
    std::fs::write(dir.join("report.txt"), render_table(report))?;
    for (row, trace) in report.rows.iter().zip(traces) {
        trace.save(&dir.join(&row.trace))?;
    }
    Ok(())
}
